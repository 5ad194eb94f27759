#include "fedgroup/fedgroup.h"

#include "fedgroup/config.hpp"
#include "fedgroup/error.hpp"
#include "fedgroup/fedsim.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

using namespace fedgroup;
using nlohmann::json;

struct fg_devices {
    DeviceSet set;
};

struct fg_model {
    ModelParams params;
};

struct fg_run {
    fg_model model;
    RoundHistory history;
    std::vector<double> epoch_losses;
    bool federated = false;
};

namespace {

thread_local std::string last_error;

fg_status fail(fg_status status, const std::string& message)
{
    last_error = message;
    return status;
}

template <class F> fg_status guarded(F&& body)
{
    try {
        body();
        last_error.clear();
        return FG_OK;
    } catch (const std::invalid_argument& e) {
        return fail(FG_ERR_INVALID_ARGUMENT, e.what());
    } catch (const json::exception& e) {
        return fail(FG_ERR_INVALID_ARGUMENT, std::string("invalid JSON: ") + e.what());
    } catch (const DataError& e) {
        return fail(FG_ERR_DATA, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(FG_ERR_DATA, e.what());
    } catch (const std::exception& e) {
        return fail(FG_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(FG_ERR_RUNTIME, "unknown error");
    }
}

void require(const void* p, const char* name)
{
    if (!p)
        throw std::invalid_argument(std::string(name) + " must not be NULL");
}

json parse_json(const char* text, const char* name)
{
    if (!text || !*text)
        return json::object();
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string(name) + " is not valid JSON: " + e.what());
    }
}

char* duplicate(const std::string& s)
{
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out)
        throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

json realization_json(const ScoredRealization& r, const DeviceSet& set)
{
    json groups = json::array();
    json pooled = json::array();
    const auto counts = set.label_counts();
    for (const auto& g : r.partition.groups()) {
        json ids = json::array();
        std::vector<LabelCounts> members;
        for (int d : g) {
            ids.push_back(set.devices[d].id);
            members.push_back(counts[d]);
        }
        groups.push_back(std::move(ids));
        pooled.push_back(pooled_distribution(members).probs);
    }
    return {{"score", score_to_json(r.score)},
            {"realization", r.realization_index},
            {"groups", std::move(groups)},
            {"assignment", r.partition.group_of()},
            {"pooled_distributions", std::move(pooled)}};
}

json report_to_json(const EvalReport& r)
{
    json per_client = json::array();
    for (const auto& [id, f1] : r.per_client_f1)
        per_client.push_back({{"id", id}, {"f1", f1}});
    return {{"per_client", std::move(per_client)}, {"mean_f1", r.mean_f1}, {"std_f1", r.std_f1}};
}

Partition partition_from(const int* group_of_device, std::size_t n, const DeviceSet& set)
{
    require(group_of_device, "group_of_device");
    if (n != set.devices.size())
        throw std::invalid_argument("assignment has " + std::to_string(n) + " entries for " +
                                    std::to_string(set.devices.size()) + " devices");
    return Partition::from_assignment(std::span<const int>(group_of_device, n));
}

std::vector<LabelDistribution> rows_of(const double* data, std::size_t rows, std::size_t cols)
{
    std::vector<LabelDistribution> out(rows);
    for (std::size_t r = 0; r < rows; ++r)
        out[r].probs.assign(data + r * cols, data + (r + 1) * cols);
    return out;
}

} // namespace

extern "C" {

const char* fg_last_error(void)
{
    return last_error.c_str();
}

const char* fg_version(void)
{
    return "0.1.0";
}

void fg_string_free(char* s)
{
    std::free(s);
}

fg_status fg_normalized_entropy(const double* probs, size_t classes, double* out)
{
    return guarded([&] {
        require(probs, "probs");
        require(out, "out");
        *out = normalized_entropy(rows_of(probs, 1, classes).front(), classes);
    });
}

fg_status fg_hellinger(const double* p, const double* q, size_t classes, double* out)
{
    return guarded([&] {
        require(p, "p");
        require(q, "q");
        require(out, "out");
        *out = hellinger(rows_of(p, 1, classes).front(), rows_of(q, 1, classes).front());
    });
}

fg_status fg_similarity_score(const double* groups, size_t n_groups, size_t classes, double* out)
{
    return guarded([&] {
        require(groups, "groups");
        require(out, "out");
        *out = similarity_score(rows_of(groups, n_groups, classes), classes).value();
    });
}

fg_status fg_devices_ingest_csv(const char* csv_path, const char* options_json, fg_devices** out)
{
    return guarded([&] {
        require(csv_path, "csv_path");
        require(out, "out");
        json opts = parse_json(options_json, "options_json");
        SplitRatios ratios = kDefaultRatios;
        std::uint64_t seed = 0;
        if (opts.contains("ratios")) {
            ratios = split_ratios_from_json(opts.at("ratios"));
            opts.erase("ratios");
        }
        if (opts.contains("seed")) {
            seed = opts.at("seed").get<std::uint64_t>();
            opts.erase("seed");
        }
        const auto table = ingest_flows(std::filesystem::path(csv_path), ingest_options_from_json(opts));
        *out = new fg_devices{prepare_devices(table, ratios, seed)};
    });
}

fg_status fg_devices_synthesize(const char* spec_json, fg_devices** out)
{
    return guarded([&] {
        require(spec_json, "spec_json");
        require(out, "out");
        *out = new fg_devices{synthesize_noniid(synth_spec_from_json(parse_json(spec_json, "spec_json")))};
    });
}

fg_status fg_devices_load(const char* dir, fg_devices** out)
{
    return guarded([&] {
        require(dir, "dir");
        require(out, "out");
        *out = new fg_devices{load_device_set(dir)};
    });
}

fg_status fg_devices_save(const fg_devices* devices, const char* dir)
{
    return guarded([&] {
        require(devices, "devices");
        require(dir, "dir");
        save_device_set(devices->set, dir);
    });
}

fg_status fg_devices_select(const fg_devices* devices, const char* const* ids, size_t n_ids, int keep,
                            fg_devices** out)
{
    return guarded([&] {
        require(devices, "devices");
        require(out, "out");
        if (n_ids > 0)
            require(ids, "ids");
        std::vector<std::string> names(ids, ids + n_ids);
        *out = new fg_devices{keep ? devices->set.subset(names) : devices->set.without(names)};
    });
}

void fg_devices_free(fg_devices* devices)
{
    delete devices;
}

size_t fg_devices_count(const fg_devices* devices)
{
    return devices ? devices->set.devices.size() : 0;
}

const char* fg_devices_id(const fg_devices* devices, size_t index)
{
    if (!devices || index >= devices->set.devices.size())
        return nullptr;
    return devices->set.devices[index].id.c_str();
}

fg_status fg_devices_summary_csv(const fg_devices* devices, char** out)
{
    return guarded([&] {
        require(devices, "devices");
        require(out, "out");
        *out = duplicate(summary_csv(devices->set));
    });
}

fg_status fg_devices_info_json(const fg_devices* devices, char** out)
{
    return guarded([&] {
        require(devices, "devices");
        require(out, "out");
        json list = json::array();
        for (const auto& d : devices->set.devices)
            list.push_back({{"id", d.id},
                            {"label_counts", d.label_counts.counts},
                            {"sizes", {{"train", d.train.size()}, {"val", d.val.size()}, {"test", d.test.size()}}}});
        json info = {{"alphabet", devices->set.alphabet.labels()},
                     {"feature_names", devices->set.feature_names},
                     {"devices", std::move(list)}};
        *out = duplicate(info.dump());
    });
}

fg_status fg_score_partition(const fg_devices* devices, const int* group_of_device, size_t n, double* score)
{
    return guarded([&] {
        require(devices, "devices");
        require(score, "score");
        const auto p = partition_from(group_of_device, n, devices->set);
        *score = score_partition(p, devices->set.label_counts()).score.value();
    });
}

fg_status fg_select_clusters(const fg_devices* devices, const char* search_json, char** result_json)
{
    return guarded([&] {
        require(devices, "devices");
        require(result_json, "result_json");
        const auto config = search_config_from_json(parse_json(search_json, "search_json"));
        const auto sel = select_clusters(devices->set.label_counts(), config);
        json scores = json::array();
        for (auto s : sel.scores)
            scores.push_back(score_to_json(s));
        json result = {{"best", realization_json(sel.best, devices->set)},
                       {"worst", realization_json(sel.worst, devices->set)},
                       {"scores", std::move(scores)}};
        *result_json = duplicate(result.dump());
    });
}

fg_status fg_exhaustive_best(const fg_devices* devices, int groups, uint64_t cap, char** result_json)
{
    return guarded([&] {
        require(devices, "devices");
        require(result_json, "result_json");
        const auto best =
            exhaustive_best(devices->set.label_counts(), groups, cap == 0 ? kDefaultEnumerationCap : cap);
        *result_json = duplicate(realization_json(best, devices->set).dump());
    });
}

fg_status fg_run_federated(const fg_devices* clients, const char* fl_json, fg_run** out)
{
    return guarded([&] {
        require(clients, "clients");
        require(out, "out");
        const auto config = fl_config_from_json(parse_json(fl_json, "fl_json"));
        auto result = run_federated(clients->set.devices, config);
        *out = new fg_run{{std::move(result.params)}, std::move(result.history), {}, true};
    });
}

fg_status fg_run_three_tier(const fg_devices* devices, const int* group_of_device, size_t n, const char* fl_json,
                            fg_run** out)
{
    return guarded([&] {
        require(devices, "devices");
        require(out, "out");
        const auto partition = partition_from(group_of_device, n, devices->set);
        const auto config = fl_config_from_json(parse_json(fl_json, "fl_json"));
        auto result = run_three_tier(devices->set.devices, partition, config);
        *out = new fg_run{{std::move(result.params)}, std::move(result.history), {}, true};
    });
}

fg_status fg_run_centralized(const fg_devices* devices, const char* centralized_json, fg_run** out)
{
    return guarded([&] {
        require(devices, "devices");
        require(out, "out");
        const json j = parse_json(centralized_json, "centralized_json");
        for (const auto& [key, value] : j.items())
            if (key != "train" && key != "seed" && key != "epochs")
                throw std::invalid_argument("unknown key '" + key + "' in centralized config");
        const TrainConfig train = j.contains("train") ? train_config_from_json(j.at("train")) : TrainConfig{};
        const auto seed = j.value("seed", std::uint64_t{0});
        const int epochs = j.value("epochs", -1);
        auto result = run_centralized(devices->set.devices, train, seed, epochs);
        *out = new fg_run{{std::move(result.params)}, {}, std::move(result.epoch_losses), false};
    });
}

void fg_run_free(fg_run* run)
{
    delete run;
}

const fg_model* fg_run_model(const fg_run* run)
{
    return run ? &run->model : nullptr;
}

size_t fg_run_rounds(const fg_run* run)
{
    return run ? run->history.records.size() : 0;
}

fg_status fg_run_history_csv(const fg_run* run, char** out)
{
    return guarded([&] {
        require(run, "run");
        require(out, "out");
        *out = duplicate(run->federated ? run->history.to_csv() : std::string());
    });
}

fg_status fg_run_epoch_losses_json(const fg_run* run, char** out)
{
    return guarded([&] {
        require(run, "run");
        require(out, "out");
        *out = duplicate(json(run->epoch_losses).dump());
    });
}

fg_status fg_model_save(const fg_model* model, const char* path)
{
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        save_params(model->params, path);
    });
}

fg_status fg_model_load(const char* path, fg_model** out)
{
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new fg_model{load_params(path)};
    });
}

void fg_model_free(fg_model* model)
{
    delete model;
}

fg_status fg_evaluate(const fg_model* model, const fg_devices* devices, const char* averaging, const char* split,
                      char** report_json)
{
    return guarded([&] {
        require(model, "model");
        require(devices, "devices");
        require(report_json, "report_json");
        const auto mode = parse_averaging(averaging ? averaging : "macro");
        const std::string which = split ? split : "test";
        if (which != "test" && which != "val")
            throw std::invalid_argument("split must be 'test' or 'val'");
        const auto report = evaluate_on_clients(model->params, devices->set.devices, mode,
                                                which == "val" ? EvalSplit::val : EvalSplit::test);
        *report_json = duplicate(report_to_json(report).dump());
    });
}

fg_status fg_evaluate_generalization(const fg_model* model, const fg_devices* unseen, const fg_devices* training,
                                     const char* averaging, char** report_json)
{
    return guarded([&] {
        require(model, "model");
        require(unseen, "unseen");
        require(training, "training");
        require(report_json, "report_json");
        std::vector<std::string> ids;
        for (const auto& d : training->set.devices)
            ids.push_back(d.id);
        const auto report =
            evaluate_generalization(model->params, unseen->set.devices, parse_averaging(averaging ? averaging : "macro"), ids);
        *report_json = duplicate(report_to_json(report).dump());
    });
}

} // extern "C"
