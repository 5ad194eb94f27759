// fedgroup: experiment runner over the fedgroup C API.
//
//   fedgroup ingest  --config exp.json [--out DIR]
//   fedgroup synth   --config exp.json [--seed S] [--out DIR]
//   fedgroup cluster --config exp.json [--groups N] [--exhaustive] [--seed S] [--out DIR]
//   fedgroup train   --config exp.json --topology flat|clustered|centralized [--out DIR]
//   fedgroup report  RUN_DIR... [--out DIR]

#include "fedgroup/fedgroup.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
    int code;
    std::string message;
};

[[noreturn]] void fail(int code, std::string message)
{
    throw Failure{code, std::move(message)};
}

void check(fg_status status, const std::string& context)
{
    if (status != FG_OK)
        fail(status, context + ": " + fg_last_error());
}

struct DevicesDeleter {
    void operator()(fg_devices* d) const { fg_devices_free(d); }
};
struct RunDeleter {
    void operator()(fg_run* r) const { fg_run_free(r); }
};
using Devices = std::unique_ptr<fg_devices, DevicesDeleter>;
using Run = std::unique_ptr<fg_run, RunDeleter>;

std::string take(char* s)
{
    std::string out(s ? s : "");
    fg_string_free(s);
    return out;
}

std::string read_text(const fs::path& path, int code)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(code, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
        fail(FG_ERR_DATA, "cannot write " + path.string());
}

json read_json(const fs::path& path, int code)
{
    try {
        return json::parse(read_text(path, code));
    } catch (const json::exception& e) {
        fail(code, path.string() + ": " + e.what());
    }
}

// ---- experiment config ----------------------------------------------------

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string topology;
    bool exhaustive = false;
    std::optional<int> groups;
    std::string data;
    std::string partition;
    std::string pick;
    std::vector<std::string> runs;
};

const std::vector<std::string> kTopKeys = {"seed", "dataset", "data_dir", "holdout",     "groups", "search", "fl",
                                           "centralized", "train", "averaging", "partition", "out", "label"};

// Loads the config and applies command-line overrides. The top-level seed
// fills every nested seed that is not set explicitly; --seed replaces all.
json load_config(const Options& opt)
{
    json c = opt.config.empty() ? json::object() : read_json(opt.config, FG_ERR_INVALID_ARGUMENT);
    if (!c.is_object())
        fail(FG_ERR_INVALID_ARGUMENT, "config must be a JSON object");
    for (const auto& [key, value] : c.items())
        if (std::find(kTopKeys.begin(), kTopKeys.end(), key) == kTopKeys.end())
            fail(FG_ERR_INVALID_ARGUMENT, "unknown key '" + key + "' in config");

    if (opt.seed)
        c["seed"] = *opt.seed;
    if (opt.groups)
        c["groups"] = *opt.groups;
    if (!opt.out.empty())
        c["out"] = opt.out;
    if (!opt.data.empty())
        c["data_dir"] = opt.data;
    if (!opt.partition.empty())
        c["partition"]["file"] = opt.partition;
    if (!opt.pick.empty())
        c["partition"]["pick"] = opt.pick;

    const std::uint64_t seed = c.value("seed", std::uint64_t{0});
    auto seed_into = [&](json& section) {
        if (opt.seed || !section.contains("seed"))
            section["seed"] = seed;
    };

    if (c.contains("dataset")) {
        auto& d = c["dataset"];
        if (!d.is_object() || d.size() != 1 || !(d.contains("synthetic") || d.contains("csv")))
            fail(FG_ERR_INVALID_ARGUMENT, "dataset must have exactly one of 'synthetic' or 'csv'");
        seed_into(d.begin().value());
    }

    json& search = c["search"];
    seed_into(search);
    if (c.contains("groups"))
        search["groups"] = c["groups"];

    json& fl = c["fl"];
    seed_into(fl);
    if (c.contains("train") && !fl.contains("train"))
        fl["train"] = c["train"];
    if (c.contains("averaging") && !fl.contains("averaging"))
        fl["averaging"] = c["averaging"];

    json& central = c["centralized"];
    seed_into(central);
    if (c.contains("train") && !central.contains("train"))
        central["train"] = c["train"];
    return c;
}

fs::path out_dir(const json& c, const char* fallback)
{
    if (c.contains("out"))
        return c["out"].get<std::string>();
    return fallback;
}

fs::path data_dir(const json& c)
{
    if (!c.contains("data_dir"))
        fail(FG_ERR_INVALID_ARGUMENT, "config needs 'data_dir' (or pass --data)");
    return c["data_dir"].get<std::string>();
}

std::string averaging(const json& c)
{
    return c.value("averaging", std::string("macro"));
}

std::vector<std::string> holdout(const json& c)
{
    return c.contains("holdout") ? c["holdout"].get<std::vector<std::string>>() : std::vector<std::string>{};
}

Devices select(const fg_devices* all, const std::vector<std::string>& ids, bool keep)
{
    std::vector<const char*> ptrs;
    for (const auto& id : ids)
        ptrs.push_back(id.c_str());
    fg_devices* out = nullptr;
    check(fg_devices_select(all, ptrs.data(), ptrs.size(), keep ? 1 : 0, &out), "selecting devices");
    return Devices(out);
}

// Training devices (holdout removed) and the holdout devices themselves.
std::pair<Devices, Devices> load_devices(const json& c)
{
    fg_devices* all = nullptr;
    check(fg_devices_load(data_dir(c).c_str(), &all), "loading devices");
    Devices owner(all);
    const auto held = holdout(c);
    if (held.empty())
        return {select(all, {}, false), nullptr};
    return {select(all, held, false), select(all, held, true)};
}

std::vector<std::string> ids_of(const fg_devices* d)
{
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < fg_devices_count(d); ++i)
        ids.emplace_back(fg_devices_id(d, i));
    return ids;
}

void save_devices(const fg_devices* devices, const fs::path& dir)
{
    check(fg_devices_save(devices, dir.c_str()), "saving devices");
    char* summary = nullptr;
    check(fg_devices_summary_csv(devices, &summary), "summarizing devices");
    const auto text = take(summary);
    write_text(dir / "summary.csv", text);
    std::cout << text;
}

// ---- subcommands -------------------------------------------------------------

void cmd_ingest(const Options& opt)
{
    const json c = load_config(opt);
    if (!c.contains("dataset") || !c["dataset"].contains("csv"))
        fail(FG_ERR_INVALID_ARGUMENT, "ingest needs dataset.csv in the config");
    json options = c["dataset"]["csv"];
    if (!options.contains("path"))
        fail(FG_ERR_INVALID_ARGUMENT, "dataset.csv needs 'path'");
    const std::string path = options["path"];
    options.erase("path");

    fg_devices* raw = nullptr;
    check(fg_devices_ingest_csv(path.c_str(), options.dump().c_str(), &raw), "ingesting " + path);
    Devices devices(raw);
    save_devices(devices.get(), c.contains("out") ? out_dir(c, "") : data_dir(c));
}

void cmd_synth(const Options& opt)
{
    const json c = load_config(opt);
    if (!c.contains("dataset") || !c["dataset"].contains("synthetic"))
        fail(FG_ERR_INVALID_ARGUMENT, "synth needs dataset.synthetic in the config");
    fg_devices* raw = nullptr;
    check(fg_devices_synthesize(c["dataset"]["synthetic"].dump().c_str(), &raw), "synthesizing devices");
    Devices devices(raw);
    save_devices(devices.get(), c.contains("out") ? out_dir(c, "") : data_dir(c));
}

void cmd_cluster(const Options& opt)
{
    const json c = load_config(opt);
    auto [devices, unseen] = load_devices(c);
    const fs::path out = out_dir(c, ".");

    json report;
    if (opt.exhaustive) {
        const int groups = c["search"].value("groups", 2);
        char* result = nullptr;
        check(fg_exhaustive_best(devices.get(), groups, 0, &result), "exhaustive search");
        report = {{"mode", "exhaustive"}, {"groups", groups}, {"best", json::parse(take(result))}};
    } else {
        char* result = nullptr;
        check(fg_select_clusters(devices.get(), c["search"].dump().c_str(), &result), "cluster search");
        report = json::parse(take(result));
        report["mode"] = "random";
        report["search"] = c["search"];
    }
    report["devices"] = ids_of(devices.get());
    const auto text = report.dump(2) + "\n";
    write_text(out / "cluster.json", text);
    std::cout << text;
}

// Group assignment (by device index in `devices`) for the chosen realization.
std::vector<int> assignment_from(const json& realization, const fg_devices* devices)
{
    const auto ids = ids_of(devices);
    std::vector<int> group_of(ids.size(), -1);
    const auto& groups = realization.at("groups");
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (const auto& id : groups[g]) {
            const auto it = std::find(ids.begin(), ids.end(), id.get<std::string>());
            if (it == ids.end())
                fail(FG_ERR_DATA, "partition names unknown device '" + id.get<std::string>() + "'");
            group_of[it - ids.begin()] = static_cast<int>(g);
        }
    for (std::size_t d = 0; d < ids.size(); ++d)
        if (group_of[d] < 0)
            fail(FG_ERR_DATA, "partition does not cover device '" + ids[d] + "'");
    return group_of;
}

json score_json(double s)
{
    return std::isinf(s) ? json("inf") : json(s);
}

void write_report_csv(const fs::path& path, const std::string& label, const json& evaluation)
{
    std::ostringstream csv;
    csv << "configuration,client,f1\n";
    for (const auto& row : evaluation["per_client"])
        csv << label << ',' << row["id"].get<std::string>() << ',' << row["f1"].dump() << '\n';
    write_text(path, csv.str());
}

void cmd_train(const Options& opt)
{
    json c = load_config(opt);
    const std::string topology = opt.topology;
    const fs::path out = out_dir(c, ("run_" + topology).c_str());
    if (c["fl"].value("checkpoint_every", 0) > 0 && !c["fl"].contains("checkpoint_dir"))
        c["fl"]["checkpoint_dir"] = (out / "checkpoints").string();

    auto [devices, unseen] = load_devices(c);
    const std::size_t n = fg_devices_count(devices.get());

    const std::string pick_label = c.contains("partition") ? c["partition"].value("pick", std::string("best")) : "best";
    const std::string default_label = topology == "clustered" ? "clustered_" + pick_label : topology;
    json report = {{"label", c.value("label", default_label)}, {"topology", topology}};
    fg_run* raw = nullptr;
    if (topology == "flat") {
        std::vector<int> singletons(n);
        for (std::size_t i = 0; i < n; ++i)
            singletons[i] = static_cast<int>(i);
        double score = 0.0;
        check(fg_score_partition(devices.get(), singletons.data(), n, &score), "scoring devices");
        report["score"] = score_json(score);
        check(fg_run_federated(devices.get(), c["fl"].dump().c_str(), &raw), "flat training");
    } else if (topology == "clustered") {
        if (!c.contains("partition") || !c["partition"].contains("file"))
            fail(FG_ERR_INVALID_ARGUMENT, "clustered training needs partition.file (or --partition)");
        const std::string pick = c["partition"].value("pick", std::string("best"));
        if (pick != "best" && pick != "worst")
            fail(FG_ERR_INVALID_ARGUMENT, "partition.pick must be 'best' or 'worst'");
        const json cluster = read_json(c["partition"]["file"].get<std::string>(), FG_ERR_DATA);
        if (!cluster.contains(pick))
            fail(FG_ERR_DATA, "partition file has no '" + pick + "' realization");
        const auto group_of = assignment_from(cluster[pick], devices.get());
        double score = 0.0;
        check(fg_score_partition(devices.get(), group_of.data(), n, &score), "scoring partition");
        report["score"] = score_json(score);
        report["groups"] = cluster[pick]["groups"];
        check(fg_run_three_tier(devices.get(), group_of.data(), n, c["fl"].dump().c_str(), &raw),
              "clustered training");
    } else if (topology == "centralized") {
        report["score"] = nullptr;
        check(fg_run_centralized(devices.get(), c["centralized"].dump().c_str(), &raw), "centralized training");
    } else {
        fail(FG_ERR_INVALID_ARGUMENT, "unknown topology '" + topology + "'");
    }
    Run run(raw);

    fs::create_directories(out);
    write_text(out / "config.json", c.dump(2) + "\n");
    check(fg_model_save(fg_run_model(run.get()), (out / "params.bin").c_str()), "saving params");
    if (topology != "centralized") {
        char* history = nullptr;
        check(fg_run_history_csv(run.get(), &history), "history");
        write_text(out / "history.csv", take(history));
        report["rounds"] = fg_run_rounds(run.get());
    } else {
        char* losses = nullptr;
        check(fg_run_epoch_losses_json(run.get(), &losses), "epoch losses");
        report["epoch_losses"] = json::parse(take(losses));
    }

    const std::string avg = averaging(c);
    char* eval = nullptr;
    check(fg_evaluate(fg_run_model(run.get()), devices.get(), avg.c_str(), "test", &eval), "evaluation");
    report["averaging"] = avg;
    report["evaluation"] = json::parse(take(eval));
    if (unseen) {
        char* gen = nullptr;
        check(fg_evaluate_generalization(fg_run_model(run.get()), unseen.get(), devices.get(), avg.c_str(), &gen),
              "generalization");
        report["generalization"] = json::parse(take(gen));
    }
    write_text(out / "report.json", report.dump(2) + "\n");
    write_report_csv(out / "per_client.csv", report["label"], report["evaluation"]);

    std::cout << report["label"].get<std::string>() << ": mean F1 " << report["evaluation"]["mean_f1"].dump()
              << ", std " << report["evaluation"]["std_f1"].dump() << '\n';
}

// Sort key: unscored runs first, then ascending score with inf last.
std::pair<int, double> score_key(const json& score)
{
    if (score.is_null())
        return {0, 0.0};
    if (score.is_string())
        return {2, 0.0};
    return {1, score.get<double>()};
}

void cmd_report(const Options& opt)
{
    if (opt.runs.empty())
        fail(FG_ERR_INVALID_ARGUMENT, "report needs at least one run directory");
    std::vector<json> reports;
    for (const auto& dir : opt.runs) {
        const fs::path path = fs::path(dir) / "report.json";
        if (!fs::exists(path))
            fail(FG_ERR_DATA, "missing report file " + path.string());
        reports.push_back(read_json(path, FG_ERR_DATA));
    }
    std::stable_sort(reports.begin(), reports.end(),
                     [](const json& a, const json& b) { return score_key(a["score"]) < score_key(b["score"]); });

    std::ostringstream table, clients;
    table << "configuration,similarity_score,f1_mean,f1_std\n";
    clients << "configuration,client,f1\n";
    for (const auto& r : reports) {
        const auto& score = r["score"];
        const std::string label = r["label"];
        table << label << ',' << (score.is_null() ? "-" : score.is_string() ? score.get<std::string>() : score.dump())
              << ',' << r["evaluation"]["mean_f1"].dump() << ',' << r["evaluation"]["std_f1"].dump() << '\n';
        for (const auto& row : r["evaluation"]["per_client"])
            clients << label << ',' << row["id"].get<std::string>() << ',' << row["f1"].dump() << '\n';
    }
    std::cout << table.str();
    if (!opt.out.empty()) {
        write_text(fs::path(opt.out) / "table.csv", table.str());
        write_text(fs::path(opt.out) / "per_client.csv", clients.str());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Entropy-based client grouping and FedAvg simulation"};
    app.require_subcommand(1);
    Options opt;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "Override every seed in the config");
        sub->add_option("--out", opt.out, "Output directory");
        sub->add_option("--data", opt.data, "Device dataset directory (overrides data_dir)");
    };

    auto* ingest = app.add_subcommand("ingest", "Ingest a flow CSV into per-device datasets");
    common(ingest);
    auto* synth = app.add_subcommand("synth", "Generate synthetic non-iid device datasets");
    common(synth);
    auto* cluster = app.add_subcommand("cluster", "Select best and worst client groupings");
    common(cluster);
    cluster->add_option("--groups", opt.groups, "Number of groups N")->check(CLI::PositiveNumber);
    cluster->add_flag("--exhaustive", opt.exhaustive, "Enumerate every equal-size partition");
    auto* train = app.add_subcommand("train", "Train one topology and evaluate it");
    common(train);
    train->add_option("--topology", opt.topology, "flat, clustered or centralized")
        ->required()
        ->check(CLI::IsMember({"flat", "clustered", "centralized"}));
    train->add_option("--partition", opt.partition, "Cluster report from the cluster subcommand");
    train->add_option("--pick", opt.pick, "Realization to train: best or worst")
        ->check(CLI::IsMember({"best", "worst"}));
    auto* report = app.add_subcommand("report", "Compare finished runs");
    report->add_option("runs", opt.runs, "Run directories")->required();
    report->add_option("--out", opt.out, "Directory for table.csv and per_client.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : FG_ERR_INVALID_ARGUMENT;
    }

    try {
        if (*ingest)
            cmd_ingest(opt);
        else if (*synth)
            cmd_synth(opt);
        else if (*cluster)
            cmd_cluster(opt);
        else if (*train)
            cmd_train(opt);
        else
            cmd_report(opt);
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << '\n';
        return f.code;
    } catch (const json::exception& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return FG_ERR_INVALID_ARGUMENT;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return FG_ERR_RUNTIME;
    }
    return 0;
}
