#pragma once

// Per-device flow datasets: CSV ingestion, synthetic non-iid generation,
// train/val/test splitting, standardization, pooling and on-disk layout.

#include "fedgroup/statcore.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedgroup {

// Row-aligned feature matrix and class indices.
struct Split {
    Eigen::MatrixXd features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
    bool empty() const { return labels.empty(); }

    Split rows(std::span<const std::size_t> indices) const;
    LabelCounts counts(std::size_t classes) const;
};

Split concatenate(std::span<const Split* const> parts);

struct DeviceDataset {
    std::string id;
    Split train;
    Split val;
    Split test;
    bool standardized = false;
    // Fit on train. Empty for pooled datasets.
    std::vector<double> feature_means;
    std::vector<double> feature_stds;
    LabelCounts label_counts;
    // Binary direction flag, left unscaled.
    std::optional<std::size_t> direction_column;

    std::size_t dim() const { return train.dim(); }
};

struct DeviceSet {
    ClassAlphabet alphabet;
    std::vector<std::string> feature_names;
    std::vector<DeviceDataset> devices;

    std::vector<LabelCounts> label_counts() const;
    // Devices in the given order; throws DataError on unknown ids.
    DeviceSet subset(std::span<const std::string> ids) const;
    DeviceSet without(std::span<const std::string> ids) const;
    int index_of(const std::string& id) const;
};

// Column names of a flow CSV. Features are every remaining column except
// those listed in `drop`.
struct CsvSchema {
    std::string destination = "Dst IP";
    std::string source = "Src IP";
    std::string label = "Label";
    std::string timestamp = "Timestamp";
    std::vector<std::string> drop;
};

struct IngestOptions {
    std::size_t top_devices = 16;
    CsvSchema schema;
    // Skip rows with unparsable cells instead of failing.
    bool skip_bad_rows = false;
    // Non-finite numeric cells ("inf", "nan", "Infinity") become 0 when set,
    // otherwise they count as unparsable.
    bool zero_nonfinite = true;
    // Called for each skipped row when skip_bad_rows is set.
    std::function<void(std::size_t line, const std::string& reason)> on_skip;
};

// All records of one device, before splitting.
struct DeviceRecords {
    std::string id;
    Split records;
};

struct FlowTable {
    ClassAlphabet alphabet;
    std::vector<std::string> feature_names;
    std::optional<std::size_t> direction_column;
    std::vector<DeviceRecords> devices;
};

// Picks the `top_devices` destinations with the most rows. A device holds the
// rows it received (direction 0) and the rows it sent (direction 1); the
// direction flag is appended as the last feature. Address, timestamp and
// `drop` columns are removed.
FlowTable ingest_flows(const std::filesystem::path& csv_path, const IngestOptions& options);
FlowTable ingest_flows(std::istream& csv, const IngestOptions& options);

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultRatios{0.6, 0.2, 0.2};

// Sizes from floor(ratio * n); leftover records go to train, then val.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

struct TrainValTest {
    Split train;
    Split val;
    Split test;
};

// Seeded shuffle followed by contiguous slicing.
TrainValTest split_device(const Split& records, const SplitRatios& ratios, std::uint64_t seed);

// Z-scores every split with statistics fit on train (population std). Zero
// variance columns are only centered; the direction column is untouched.
// Already standardized datasets are returned as-is.
DeviceDataset standardize(const DeviceDataset& device);

// Split and standardize every device of a flow table. Device i shuffles with
// a seed derived from (seed, i).
DeviceSet prepare_devices(const FlowTable& table, const SplitRatios& ratios, std::uint64_t seed);

struct SynthSpec {
    std::size_t classes = 4;
    std::size_t features = 8;
    // proportions[d][k]: probability of class k on device d.
    std::vector<std::vector<double>> proportions;
    // One entry per device, or a single entry applied to every device.
    std::vector<std::size_t> samples;
    // class_means[k] has `features` entries; spreads[k] is the per-axis std.
    std::vector<std::vector<double>> class_means;
    std::vector<double> spreads;
    // Each class is a pair of clusters at +mean and -mean, picked with equal
    // probability. Class-conditional means are then zero, so per-device
    // standardization does not depend on the device's label mix.
    bool mirrored = true;
    std::uint64_t seed = 0;
    SplitRatios ratios = kDefaultRatios;

    std::size_t device_count() const { return proportions.size(); }
    void validate() const;
};

// Device d puts `dominance` of its mass on class d mod K and spreads the rest
// evenly. Class means have norm `separation` and entries of equal magnitude
// (rows of a Sylvester-Hadamard matrix when K fits, random signs otherwise),
// so every feature has the same variance whatever the class mix.
SynthSpec make_skewed_spec(std::size_t devices, std::size_t classes, std::size_t features,
                           std::size_t samples_per_device, double dominance, double separation,
                           double spread, std::uint64_t seed);

// Labels drawn from each device's proportions, features from spherical
// Gaussians around the class means; split and standardized per device.
DeviceSet synthesize_noniid(const SynthSpec& spec);

// Concatenates already standardized member splits. The result keeps no
// standardization statistics of its own.
DeviceDataset pool_datasets(std::span<const DeviceDataset* const> members);
DeviceDataset pool_datasets(std::span<const DeviceDataset> members);

// devices/<id>/{train,val,test}.csv plus meta.json under `dir`.
void save_device_set(const DeviceSet& set, const std::filesystem::path& dir);
DeviceSet load_device_set(const std::filesystem::path& dir);

// One row per device: id, train sample count, per-class train counts and
// normalized entropy of the train label distribution.
std::string summary_csv(const DeviceSet& set);

} // namespace fedgroup
