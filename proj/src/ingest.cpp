#include "fedgroup/dataset.hpp"

#include "fedgroup/error.hpp"

#include "csv.hpp"

#include <algorithm>
#include <fstream>
#include <cmath>
#include <set>
#include <unordered_map>

namespace fedgroup {

namespace {

struct Columns {
    std::size_t destination = 0;
    std::size_t source = 0;
    std::size_t label = 0;
    std::vector<std::size_t> features;
    std::vector<std::string> feature_names;
    std::size_t width = 0;
};

std::size_t require_column(const std::vector<std::string>& header, const std::string& name)
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw DataError("missing column '" + name + "' in CSV header");
    return static_cast<std::size_t>(it - header.begin());
}

Columns resolve_columns(const std::vector<std::string>& header, const CsvSchema& schema)
{
    Columns c;
    c.width = header.size();
    c.destination = require_column(header, schema.destination);
    c.source = require_column(header, schema.source);
    c.label = require_column(header, schema.label);

    std::set<std::size_t> excluded{c.destination, c.source, c.label};
    if (!schema.timestamp.empty())
        excluded.insert(require_column(header, schema.timestamp));
    for (const auto& name : schema.drop)
        excluded.insert(require_column(header, name));

    for (std::size_t i = 0; i < header.size(); ++i) {
        if (excluded.count(i))
            continue;
        c.features.push_back(i);
        c.feature_names.push_back(header[i]);
    }
    if (c.features.empty())
        throw DataError("CSV has no feature columns left after dropping identifiers");
    return c;
}

struct PendingRow {
    std::vector<double> features;
    int label;
};

} // namespace

FlowTable ingest_flows(const std::filesystem::path& csv_path, const IngestOptions& options)
{
    std::ifstream in(csv_path, std::ios::binary);
    if (!in)
        throw DataError("cannot open CSV '" + csv_path.string() + "'");
    return ingest_flows(in, options);
}

FlowTable ingest_flows(std::istream& in, const IngestOptions& options)
{
    if (options.top_devices < 1)
        throw std::invalid_argument("at least one device must be selected");

    std::string line;
    std::vector<std::string> fields;
    if (!std::getline(in, line))
        throw DataError("CSV is empty");
    csv::split_line(line, fields);
    const Columns cols = resolve_columns(fields, options.schema);
    const auto data_start = in.tellg();

    // Pass 1: rows per destination and the global label set.
    std::unordered_map<std::string, std::uint64_t> per_destination;
    std::set<std::string> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty())
            continue;
        csv::split_line(line, fields);
        if (fields.size() != cols.width) {
            if (options.skip_bad_rows) {
                if (options.on_skip)
                    options.on_skip(line_no, "wrong field count");
                continue;
            }
            throw ParseError("expected " + std::to_string(cols.width) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        ++per_destination[fields[cols.destination]];
        labels.insert(fields[cols.label]);
    }

    if (per_destination.size() < options.top_devices)
        throw DataError("requested " + std::to_string(options.top_devices) + " devices but the CSV has only " +
                        std::to_string(per_destination.size()) + " distinct destinations");
    if (labels.size() < 2)
        throw DataError("CSV has fewer than two distinct labels");

    std::vector<std::pair<std::string, std::uint64_t>> ranked(per_destination.begin(), per_destination.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    ranked.resize(options.top_devices);

    FlowTable table;
    table.alphabet = ClassAlphabet(std::vector<std::string>(labels.begin(), labels.end()));
    table.feature_names = cols.feature_names;
    table.feature_names.push_back("direction");
    table.direction_column = cols.features.size();

    std::unordered_map<std::string, std::size_t> device_of;
    for (std::size_t i = 0; i < ranked.size(); ++i)
        device_of.emplace(ranked[i].first, i);

    // Pass 2: parse the rows touching a selected device.
    in.clear();
    in.seekg(data_start);
    if (!in)
        throw DataError("CSV stream is not seekable");

    std::vector<std::vector<PendingRow>> rows(ranked.size());
    std::vector<double> values(cols.features.size());
    line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty())
            continue;
        csv::split_line(line, fields);
        if (fields.size() != cols.width)
            continue; // reported in pass 1

        auto dst = device_of.find(fields[cols.destination]);
        auto src = device_of.find(fields[cols.source]);
        if (dst == device_of.end() && src == device_of.end())
            continue;

        std::string bad;
        for (std::size_t f = 0; f < cols.features.size() && bad.empty(); ++f) {
            const auto& cell = fields[cols.features[f]];
            auto v = csv::parse_double(cell);
            if (!v) {
                bad = "non-numeric value '" + cell + "' in column '" + cols.feature_names[f] + "'";
            } else if (!std::isfinite(*v)) {
                if (options.zero_nonfinite)
                    *v = 0.0;
                else
                    bad = "non-finite value '" + cell + "' in column '" + cols.feature_names[f] + "'";
            }
            values[f] = v.value_or(0.0);
        }
        if (!bad.empty()) {
            if (!options.skip_bad_rows)
                throw ParseError(bad, line_no);
            if (options.on_skip)
                options.on_skip(line_no, bad);
            continue;
        }

        const int label = table.alphabet.index_of(fields[cols.label]);
        auto add = [&](std::size_t device, double direction) {
            PendingRow r{values, label};
            r.features.push_back(direction);
            rows[device].push_back(std::move(r));
        };
        if (dst != device_of.end())
            add(dst->second, 0.0);
        // A flow a device sends to itself is counted once, as received.
        if (src != device_of.end() && src != dst)
            add(src->second, 1.0);
    }

    const auto dim = static_cast<Eigen::Index>(table.feature_names.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        DeviceRecords dev;
        dev.id = ranked[i].first;
        auto& rs = rows[i];
        dev.records.features.resize(static_cast<Eigen::Index>(rs.size()), dim);
        dev.records.labels.reserve(rs.size());
        for (std::size_t r = 0; r < rs.size(); ++r) {
            dev.records.features.row(static_cast<Eigen::Index>(r)) =
                Eigen::Map<const Eigen::RowVectorXd>(rs[r].features.data(), dim);
            dev.records.labels.push_back(rs[r].label);
        }
        rs.clear();
        rs.shrink_to_fit();
        table.devices.push_back(std::move(dev));
    }
    return table;
}

} // namespace fedgroup
