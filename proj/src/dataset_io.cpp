#include "fedgroup/dataset.hpp"

#include "fedgroup/error.hpp"

#include "csv.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace fedgroup {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kLayoutVersion = 1;

std::string directory_name(const std::string& id)
{
    std::string out;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                        c == '-' || c == '_';
        out += ok ? c : '_';
    }
    if (out.empty() || out == "." || out == "..")
        out = "_" + out;
    return out;
}

void write_split(const fs::path& path, const Split& split, const DeviceSet& set)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write '" + path.string() + "'");
    for (const auto& name : set.feature_names)
        out << csv::quote(name) << ',';
    out << "label\n";
    for (std::size_t r = 0; r < split.size(); ++r) {
        for (Eigen::Index c = 0; c < split.features.cols(); ++c)
            out << csv::format_double(split.features(static_cast<Eigen::Index>(r), c)) << ',';
        out << csv::quote(set.alphabet.name(split.labels[r])) << '\n';
    }
    if (!out)
        throw DataError("failed writing '" + path.string() + "'");
}

Split read_split(const fs::path& path, const DeviceSet& set)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open '" + path.string() + "'");
    const auto dim = set.feature_names.size();
    std::string line;
    std::vector<std::string> fields;
    if (!std::getline(in, line))
        throw DataError("'" + path.string() + "' is empty");
    csv::split_line(line, fields);
    if (fields.size() != dim + 1)
        throw DataError("'" + path.string() + "' header does not match meta.json features");

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty())
            continue;
        csv::split_line(line, fields);
        if (fields.size() != dim + 1)
            throw ParseError("'" + path.string() + "': wrong field count", line_no);
        for (std::size_t f = 0; f < dim; ++f) {
            auto v = csv::parse_double(fields[f]);
            if (!v)
                throw ParseError("'" + path.string() + "': non-numeric value '" + fields[f] + "'", line_no);
            values.push_back(*v);
        }
        const int label = set.alphabet.index_of(fields[dim]);
        if (label < 0)
            throw ParseError("'" + path.string() + "': unknown label '" + fields[dim] + "'", line_no);
        labels.push_back(label);
    }

    Split s;
    s.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(dim));
    s.labels = std::move(labels);
    return s;
}

} // namespace

void save_device_set(const DeviceSet& set, const fs::path& dir)
{
    const fs::path devices_dir = dir / "devices";
    fs::create_directories(devices_dir);

    json meta;
    meta["version"] = kLayoutVersion;
    meta["alphabet"] = set.alphabet.labels();
    meta["feature_names"] = set.feature_names;
    meta["devices"] = json::array();
    std::set<std::string> used;
    for (std::size_t i = 0; i < set.devices.size(); ++i) {
        const auto& d = set.devices[i];
        std::string name = directory_name(d.id);
        if (!used.insert(name).second) {
            name += "_" + std::to_string(i);
            used.insert(name);
        }
        const fs::path ddir = devices_dir / name;
        fs::create_directories(ddir);
        write_split(ddir / "train.csv", d.train, set);
        write_split(ddir / "val.csv", d.val, set);
        write_split(ddir / "test.csv", d.test, set);

        json jd;
        jd["id"] = d.id;
        jd["dir"] = name;
        jd["standardized"] = d.standardized;
        jd["feature_means"] = d.feature_means;
        jd["feature_stds"] = d.feature_stds;
        jd["label_counts"] = d.label_counts.counts;
        jd["direction_column"] = d.direction_column ? json(*d.direction_column) : json(nullptr);
        jd["sizes"] = {{"train", d.train.size()}, {"val", d.val.size()}, {"test", d.test.size()}};
        meta["devices"].push_back(std::move(jd));
    }
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << '\n';
    if (!out)
        throw DataError("failed writing '" + (dir / "meta.json").string() + "'");
}

DeviceSet load_device_set(const fs::path& dir)
{
    std::ifstream in(dir / "meta.json");
    if (!in)
        throw DataError("no meta.json under '" + dir.string() + "'");
    json meta;
    try {
        meta = json::parse(in);
        if (meta.at("version").get<int>() != kLayoutVersion)
            throw DataError("unsupported device layout version in '" + dir.string() + "'");

        DeviceSet set;
        set.alphabet = ClassAlphabet(meta.at("alphabet").get<std::vector<std::string>>());
        set.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
        for (const auto& jd : meta.at("devices")) {
            DeviceDataset d;
            d.id = jd.at("id").get<std::string>();
            const fs::path ddir = dir / "devices" / jd.at("dir").get<std::string>();
            d.train = read_split(ddir / "train.csv", set);
            d.val = read_split(ddir / "val.csv", set);
            d.test = read_split(ddir / "test.csv", set);
            d.standardized = jd.at("standardized").get<bool>();
            d.feature_means = jd.at("feature_means").get<std::vector<double>>();
            d.feature_stds = jd.at("feature_stds").get<std::vector<double>>();
            d.label_counts = LabelCounts(jd.at("label_counts").get<std::vector<std::uint64_t>>());
            if (!jd.at("direction_column").is_null())
                d.direction_column = jd.at("direction_column").get<std::size_t>();
            if (d.label_counts != d.train.counts(set.alphabet.size()))
                throw DataError("device '" + d.id + "': label_counts disagree with train.csv");
            set.devices.push_back(std::move(d));
        }
        return set;
    } catch (const json::exception& e) {
        throw DataError("malformed meta.json under '" + dir.string() + "': " + e.what());
    }
}

std::string summary_csv(const DeviceSet& set)
{
    std::ostringstream out;
    out << "device,samples";
    for (const auto& l : set.alphabet.labels())
        out << ',' << csv::quote(l);
    out << ",entropy\n";
    for (const auto& d : set.devices) {
        out << csv::quote(d.id) << ',' << d.label_counts.total();
        for (auto c : d.label_counts.counts)
            out << ',' << c;
        const double h = d.label_counts.total() > 0
                             ? normalized_entropy(distribution_from_counts(d.label_counts), set.alphabet.size())
                             : 0.0;
        out << ',' << csv::format_double(h) << '\n';
    }
    return out.str();
}

} // namespace fedgroup
