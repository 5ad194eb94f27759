#include "fedgroup/dataset.hpp"

#include "fedgroup/error.hpp"
#include "fedgroup/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fedgroup {

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed)
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
    return order;
}

void apply_standardization(Split& split, const std::vector<double>& means, const std::vector<double>& stds)
{
    for (Eigen::Index c = 0; c < split.features.cols(); ++c)
        split.features.col(c) = (split.features.col(c).array() - means[c]) / stds[c];
}

} // namespace

Split Split::rows(std::span<const std::size_t> indices) const
{
    Split out;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
    out.labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(indices[i]));
        out.labels.push_back(labels[indices[i]]);
    }
    return out;
}

LabelCounts Split::counts(std::size_t classes) const
{
    LabelCounts c(std::vector<std::uint64_t>(classes, 0));
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= classes)
            throw std::invalid_argument("label index outside the class alphabet");
        ++c.counts[l];
    }
    return c;
}

Split concatenate(std::span<const Split* const> parts)
{
    Split out;
    Eigen::Index rows = 0;
    Eigen::Index cols = -1;
    for (const Split* p : parts) {
        if (p->empty())
            continue;
        if (cols >= 0 && p->features.cols() != cols)
            throw std::invalid_argument("cannot concatenate splits of different feature dimension");
        cols = p->features.cols();
        rows += p->features.rows();
    }
    if (cols < 0)
        cols = parts.empty() ? 0 : parts.front()->features.cols();
    out.features.resize(rows, cols);
    out.labels.reserve(static_cast<std::size_t>(rows));
    Eigen::Index at = 0;
    for (const Split* p : parts) {
        if (p->empty())
            continue;
        out.features.middleRows(at, p->features.rows()) = p->features;
        at += p->features.rows();
        out.labels.insert(out.labels.end(), p->labels.begin(), p->labels.end());
    }
    return out;
}

std::vector<LabelCounts> DeviceSet::label_counts() const
{
    std::vector<LabelCounts> out;
    out.reserve(devices.size());
    for (const auto& d : devices)
        out.push_back(d.label_counts);
    return out;
}

int DeviceSet::index_of(const std::string& id) const
{
    for (std::size_t i = 0; i < devices.size(); ++i)
        if (devices[i].id == id)
            return static_cast<int>(i);
    return -1;
}

DeviceSet DeviceSet::subset(std::span<const std::string> ids) const
{
    DeviceSet out{alphabet, feature_names, {}};
    for (const auto& id : ids) {
        const int i = index_of(id);
        if (i < 0)
            throw DataError("unknown device '" + id + "'");
        out.devices.push_back(devices[i]);
    }
    return out;
}

DeviceSet DeviceSet::without(std::span<const std::string> ids) const
{
    for (const auto& id : ids)
        if (index_of(id) < 0)
            throw DataError("unknown device '" + id + "'");
    DeviceSet out{alphabet, feature_names, {}};
    for (const auto& d : devices)
        if (std::find(ids.begin(), ids.end(), d.id) == ids.end())
            out.devices.push_back(d);
    return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios)
{
    double sum = 0.0;
    for (double r : ratios) {
        if (r < 0.0)
            throw std::invalid_argument("negative split ratio");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split ratios must sum to 1");

    std::array<std::size_t, 3> sizes{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        // The epsilon absorbs products such as 0.6 * 5 = 3.0000000000000004.
        sizes[i] = static_cast<std::size_t>(std::floor(ratios[i] * static_cast<double>(n) + 1e-9));
        sizes[i] = std::min(sizes[i], n - assigned);
        assigned += sizes[i];
    }
    for (std::size_t i = 0; assigned < n; i = (i + 1) % 3) {
        ++sizes[i];
        ++assigned;
    }
    return sizes;
}

TrainValTest split_device(const Split& records, const SplitRatios& ratios, std::uint64_t seed)
{
    if (records.empty())
        throw std::invalid_argument("cannot split an empty record set");
    const auto sizes = split_sizes(records.size(), ratios);
    const auto order = shuffled_indices(records.size(), seed);
    std::span<const std::size_t> all(order);
    return {records.rows(all.subspan(0, sizes[0])),
            records.rows(all.subspan(sizes[0], sizes[1])),
            records.rows(all.subspan(sizes[0] + sizes[1], sizes[2]))};
}

DeviceDataset standardize(const DeviceDataset& device)
{
    if (device.standardized)
        return device;
    if (device.train.empty())
        throw std::invalid_argument("device '" + device.id + "' has an empty train split");

    DeviceDataset out = device;
    const auto& x = device.train.features;
    const auto n = static_cast<double>(x.rows());
    out.feature_means.assign(static_cast<std::size_t>(x.cols()), 0.0);
    out.feature_stds.assign(static_cast<std::size_t>(x.cols()), 1.0);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (device.direction_column && static_cast<Eigen::Index>(*device.direction_column) == c)
            continue;
        const double mean = x.col(c).mean();
        const double var = (x.col(c).array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        out.feature_means[c] = mean;
        out.feature_stds[c] = sd > 0.0 ? sd : 1.0;
    }
    apply_standardization(out.train, out.feature_means, out.feature_stds);
    apply_standardization(out.val, out.feature_means, out.feature_stds);
    apply_standardization(out.test, out.feature_means, out.feature_stds);
    out.standardized = true;
    return out;
}

DeviceSet prepare_devices(const FlowTable& table, const SplitRatios& ratios, std::uint64_t seed)
{
    DeviceSet set{table.alphabet, table.feature_names, {}};
    set.devices.reserve(table.devices.size());
    for (std::size_t i = 0; i < table.devices.size(); ++i) {
        const auto& raw = table.devices[i];
        auto parts = split_device(raw.records, ratios, derive_seed(seed, {i}));
        DeviceDataset d;
        d.id = raw.id;
        d.train = std::move(parts.train);
        d.val = std::move(parts.val);
        d.test = std::move(parts.test);
        d.direction_column = table.direction_column;
        d.label_counts = d.train.counts(table.alphabet.size());
        set.devices.push_back(standardize(d));
    }
    return set;
}

void SynthSpec::validate() const
{
    if (classes < 2)
        throw std::invalid_argument("synthetic spec needs at least two classes");
    if (features < 1)
        throw std::invalid_argument("synthetic spec needs at least one feature");
    if (proportions.empty())
        throw std::invalid_argument("synthetic spec has no devices");
    for (std::size_t d = 0; d < proportions.size(); ++d) {
        const auto& p = proportions[d];
        if (p.size() != classes)
            throw std::invalid_argument("device " + std::to_string(d) + " proportions have the wrong length");
        double s = 0.0;
        for (double v : p) {
            if (!(v >= 0.0))
                throw std::invalid_argument("device " + std::to_string(d) + " has a negative proportion");
            s += v;
        }
        if (std::abs(s - 1.0) > kDistributionTolerance)
            throw std::invalid_argument("device " + std::to_string(d) + " proportions do not sum to 1");
    }
    if (samples.size() != 1 && samples.size() != proportions.size())
        throw std::invalid_argument("samples must have one entry or one per device");
    for (auto s : samples)
        if (s < 1)
            throw std::invalid_argument("every device needs at least one sample");
    if (class_means.size() != classes || spreads.size() != classes)
        throw std::invalid_argument("class means and spreads need one entry per class");
    for (const auto& m : class_means)
        if (m.size() != features)
            throw std::invalid_argument("class mean has the wrong dimension");
    for (double s : spreads)
        if (!(s > 0.0))
            throw std::invalid_argument("spreads must be positive");
}

SynthSpec make_skewed_spec(std::size_t devices, std::size_t classes, std::size_t features,
                           std::size_t samples_per_device, double dominance, double separation,
                           double spread, std::uint64_t seed)
{
    if (classes < 2)
        throw std::invalid_argument("synthetic spec needs at least two classes");
    if (dominance < 0.0 || dominance > 1.0)
        throw std::invalid_argument("dominance must lie in [0, 1]");

    SynthSpec spec;
    spec.classes = classes;
    spec.features = features;
    spec.seed = seed;
    spec.samples = {samples_per_device};
    const double rest = (1.0 - dominance) / static_cast<double>(classes - 1);
    for (std::size_t d = 0; d < devices; ++d) {
        std::vector<double> p(classes, rest);
        p[d % classes] = dominance;
        spec.proportions.push_back(std::move(p));
    }

    // Sylvester-Hadamard rows 1..K truncated to `features` columns; row 0 is
    // constant and skipped.
    std::size_t order = 1;
    while (order < features)
        order *= 2;
    std::mt19937_64 rng(derive_seed(seed, {0xC1A55}));
    const double scale = separation / std::sqrt(static_cast<double>(features));
    for (std::size_t k = 0; k < classes; ++k) {
        std::vector<double> m(features);
        for (std::size_t f = 0; f < features; ++f) {
            double sign;
            if (k + 1 < order)
                sign = std::popcount((k + 1) & f) % 2 ? -1.0 : 1.0;
            else
                sign = rng() & 1 ? -1.0 : 1.0;
            m[f] = sign * scale;
        }
        spec.class_means.push_back(std::move(m));
    }
    spec.spreads.assign(classes, spread);
    return spec;
}

DeviceSet synthesize_noniid(const SynthSpec& spec)
{
    spec.validate();
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < spec.classes; ++k)
        labels.push_back("class" + std::to_string(k));
    std::vector<std::string> names;
    for (std::size_t f = 0; f < spec.features; ++f)
        names.push_back("f" + std::to_string(f));

    FlowTable table{ClassAlphabet(std::move(labels)), std::move(names), std::nullopt, {}};
    std::vector<DeviceRecords> raw;
    for (std::size_t d = 0; d < spec.device_count(); ++d) {
        const std::size_t n = spec.samples.size() == 1 ? spec.samples.front() : spec.samples[d];
        std::mt19937_64 rng(derive_seed(spec.seed, {d}));
        std::discrete_distribution<int> pick(spec.proportions[d].begin(), spec.proportions[d].end());
        std::normal_distribution<double> normal;

        Split s;
        s.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.features));
        s.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int k = pick(rng);
            s.labels[i] = k;
            const double side = spec.mirrored && (rng() & 1) ? -1.0 : 1.0;
            for (std::size_t f = 0; f < spec.features; ++f)
                s.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) =
                    side * spec.class_means[k][f] + spec.spreads[k] * normal(rng);
        }
        raw.push_back({"dev" + std::to_string(d), std::move(s)});
    }
    table.devices = std::move(raw);

    return prepare_devices(table, spec.ratios, derive_seed(spec.seed, {0x5B11}));
}

DeviceDataset pool_datasets(std::span<const DeviceDataset* const> members)
{
    if (members.empty())
        throw std::invalid_argument("cannot pool zero devices");
    const auto dim = members.front()->dim();
    const auto classes = members.front()->label_counts.size();
    std::vector<const Split*> train, val, test;
    DeviceDataset out;
    for (const DeviceDataset* m : members) {
        if (m->dim() != dim)
            throw std::invalid_argument("cannot pool devices of different feature dimension");
        if (m->label_counts.size() != classes)
            throw std::invalid_argument("cannot pool devices over different alphabets");
        train.push_back(&m->train);
        val.push_back(&m->val);
        test.push_back(&m->test);
        out.label_counts += m->label_counts;
        out.id += (out.id.empty() ? "" : "+") + m->id;
    }
    out.train = concatenate(train);
    out.val = concatenate(val);
    out.test = concatenate(test);
    out.direction_column = members.front()->direction_column;
    out.standardized = true;
    return out;
}

DeviceDataset pool_datasets(std::span<const DeviceDataset> members)
{
    std::vector<const DeviceDataset*> ptrs;
    for (const auto& m : members)
        ptrs.push_back(&m);
    return pool_datasets(std::span<const DeviceDataset* const>(ptrs));
}

} // namespace fedgroup
