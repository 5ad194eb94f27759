#pragma once

// JSON readers for the library's configuration structs. Unknown keys are
// rejected so typos in experiment files fail loudly.

#include "fedgroup/dataset.hpp"
#include "fedgroup/fedsim.hpp"
#include "fedgroup/model.hpp"
#include "fedgroup/partition.hpp"

#include <json.hpp>

namespace fedgroup {

TrainConfig train_config_from_json(const nlohmann::json& j);
FLConfig fl_config_from_json(const nlohmann::json& j);
SearchConfig search_config_from_json(const nlohmann::json& j);
IngestOptions ingest_options_from_json(const nlohmann::json& j);
SplitRatios split_ratios_from_json(const nlohmann::json& j);

// Either an explicit spec or {"skewed": {...}} shorthand for make_skewed_spec.
SynthSpec synth_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const FLConfig& c);

// Numbers for finite scores, "inf" otherwise.
nlohmann::json score_to_json(ScoreValue s);
ScoreValue score_from_json(const nlohmann::json& j);

} // namespace fedgroup
