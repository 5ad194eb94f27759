#include "fedgroup/config.hpp"

#include <initializer_list>
#include <stdexcept>
#include <string>

namespace fedgroup {

using nlohmann::json;

namespace {

void only_keys(const json& j, const char* what, std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
        throw std::invalid_argument(std::string(what) + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || key == a;
        if (!ok)
            throw std::invalid_argument("unknown key '" + key + "' in " + what);
    }
}

template <class T> void read(const json& j, const char* key, T& out)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string("bad value for '") + key + "': " + j.at(key).dump());
    }
}

EvalSplit parse_split(const std::string& s)
{
    if (s == "val")
        return EvalSplit::val;
    if (s == "test")
        return EvalSplit::test;
    throw std::invalid_argument("history_split must be 'val' or 'test', got '" + s + "'");
}

} // namespace

TrainConfig train_config_from_json(const json& j)
{
    only_keys(j, "train config", {"learning_rate", "batch_size", "max_epochs", "beta1", "beta2", "epsilon", "seed"});
    TrainConfig c;
    read(j, "learning_rate", c.learning_rate);
    read(j, "batch_size", c.batch_size);
    read(j, "max_epochs", c.max_epochs);
    read(j, "beta1", c.beta1);
    read(j, "beta2", c.beta2);
    read(j, "epsilon", c.epsilon);
    read(j, "seed", c.seed);
    c.validate();
    return c;
}

FLConfig fl_config_from_json(const json& j)
{
    only_keys(j, "fl config",
              {"rounds", "local_epochs", "train", "seed", "persist_adam", "averaging", "history_split", "early_stop",
               "patience", "min_delta", "checkpoint_dir", "checkpoint_every"});
    FLConfig c;
    if (j.contains("train"))
        c.train = train_config_from_json(j.at("train"));
    read(j, "rounds", c.rounds);
    read(j, "local_epochs", c.local_epochs);
    read(j, "seed", c.seed);
    read(j, "persist_adam", c.persist_adam);
    if (j.contains("averaging"))
        c.averaging = parse_averaging(j.at("averaging").get<std::string>());
    if (j.contains("history_split"))
        c.history_split = parse_split(j.at("history_split").get<std::string>());
    read(j, "early_stop", c.early_stop);
    read(j, "patience", c.patience);
    read(j, "min_delta", c.min_delta);
    std::string dir;
    read(j, "checkpoint_dir", dir);
    c.checkpoint_dir = dir;
    read(j, "checkpoint_every", c.checkpoint_every);
    c.validate();
    return c;
}

SearchConfig search_config_from_json(const json& j)
{
    only_keys(j, "search config", {"realizations", "groups", "seed", "equal_sizes", "dedup"});
    SearchConfig c;
    read(j, "realizations", c.realizations);
    read(j, "groups", c.group_count);
    read(j, "seed", c.seed);
    read(j, "equal_sizes", c.equal_sizes);
    read(j, "dedup", c.dedup);
    if (c.realizations < 1)
        throw std::invalid_argument("realizations must be at least 1");
    return c;
}

SplitRatios split_ratios_from_json(const json& j)
{
    auto v = j.get<std::vector<double>>();
    if (v.size() != 3)
        throw std::invalid_argument("ratios must have three entries (train, val, test)");
    return {v[0], v[1], v[2]};
}

IngestOptions ingest_options_from_json(const json& j)
{
    only_keys(j, "ingest options", {"top_devices", "schema", "skip_bad_rows", "zero_nonfinite"});
    IngestOptions o;
    read(j, "top_devices", o.top_devices);
    read(j, "skip_bad_rows", o.skip_bad_rows);
    read(j, "zero_nonfinite", o.zero_nonfinite);
    if (j.contains("schema")) {
        const auto& s = j.at("schema");
        only_keys(s, "csv schema", {"destination", "source", "label", "timestamp", "drop"});
        read(s, "destination", o.schema.destination);
        read(s, "source", o.schema.source);
        read(s, "label", o.schema.label);
        read(s, "timestamp", o.schema.timestamp);
        read(s, "drop", o.schema.drop);
    }
    return o;
}

SynthSpec synth_spec_from_json(const json& j)
{
    if (j.contains("skewed")) {
        only_keys(j, "synthetic spec", {"skewed", "seed", "ratios", "mirrored"});
        const auto& s = j.at("skewed");
        only_keys(s, "skewed spec",
                  {"devices", "classes", "features", "samples", "dominance", "separation", "spread"});
        std::size_t devices = 8, classes = 4, features = 8, samples = 2000;
        double dominance = 0.9, separation = 4.0, spread = 1.0;
        std::uint64_t seed = 0;
        read(s, "devices", devices);
        read(s, "classes", classes);
        read(s, "features", features);
        read(s, "samples", samples);
        read(s, "dominance", dominance);
        read(s, "separation", separation);
        read(s, "spread", spread);
        read(j, "seed", seed);
        auto spec = make_skewed_spec(devices, classes, features, samples, dominance, separation, spread, seed);
        if (j.contains("ratios"))
            spec.ratios = split_ratios_from_json(j.at("ratios"));
        read(j, "mirrored", spec.mirrored);
        spec.validate();
        return spec;
    }

    only_keys(j, "synthetic spec",
              {"classes", "features", "proportions", "samples", "class_means", "spreads", "mirrored", "seed",
               "ratios"});
    SynthSpec spec;
    read(j, "classes", spec.classes);
    read(j, "features", spec.features);
    read(j, "proportions", spec.proportions);
    read(j, "samples", spec.samples);
    read(j, "class_means", spec.class_means);
    read(j, "spreads", spec.spreads);
    read(j, "mirrored", spec.mirrored);
    read(j, "seed", spec.seed);
    if (j.contains("ratios"))
        spec.ratios = split_ratios_from_json(j.at("ratios"));
    spec.validate();
    return spec;
}

json to_json(const TrainConfig& c)
{
    return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"max_epochs", c.max_epochs},
            {"beta1", c.beta1},                 {"beta2", c.beta2},           {"epsilon", c.epsilon},
            {"seed", c.seed}};
}

json to_json(const FLConfig& c)
{
    return {{"rounds", c.rounds},
            {"local_epochs", c.local_epochs},
            {"train", to_json(c.train)},
            {"seed", c.seed},
            {"persist_adam", c.persist_adam},
            {"averaging", to_string(c.averaging)},
            {"history_split", c.history_split == EvalSplit::val ? "val" : "test"},
            {"early_stop", c.early_stop},
            {"patience", c.patience},
            {"min_delta", c.min_delta},
            {"checkpoint_dir", c.checkpoint_dir.string()},
            {"checkpoint_every", c.checkpoint_every}};
}

json score_to_json(ScoreValue s)
{
    if (s.is_infinite())
        return "inf";
    return s.value();
}

ScoreValue score_from_json(const json& j)
{
    if (j.is_string())
        return ScoreValue::parse(j.get<std::string>());
    if (j.is_number())
        return ScoreValue(j.get<double>());
    throw std::invalid_argument("score must be a number or \"inf\"");
}

} // namespace fedgroup
