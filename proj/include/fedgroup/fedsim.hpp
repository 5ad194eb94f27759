#pragma once

// Deterministic FedAvg simulation: flat federated learning over devices,
// three-tier learning with data aggregators as the federated clients, and the
// centralized baseline.

#include "fedgroup/dataset.hpp"
#include "fedgroup/model.hpp"
#include "fedgroup/partition.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedgroup {

inline constexpr int kFlatRounds = 200;
inline constexpr int kClusteredRounds = 90;

enum class EvalSplit { val, test };

struct FLConfig {
    int rounds = kFlatRounds;
    int local_epochs = 1;
    TrainConfig train;
    std::uint64_t seed = 0;
    // Keep each client's Adam moments across rounds instead of resetting.
    bool persist_adam = false;
    F1Averaging averaging = F1Averaging::macro;
    // Split used for the per-round mean F1 in the history.
    EvalSplit history_split = EvalSplit::val;
    // Stop once the best history F1 has not improved by more than
    // min_delta for `patience` rounds.
    bool early_stop = false;
    int patience = 10;
    double min_delta = 1e-3;
    // Write round_<i>/params.bin every `checkpoint_every` rounds when set.
    std::filesystem::path checkpoint_dir;
    int checkpoint_every = 0;

    void validate() const;
};

struct RoundRecord {
    int round = 0; // 1-based
    double mean_f1 = 0.0;
    double std_f1 = 0.0;
    std::vector<double> client_losses;
};

struct RoundHistory {
    std::vector<std::string> client_ids;
    std::vector<RoundRecord> records;

    // round,mean_f1,std_f1,loss_<client>...
    std::string to_csv() const;
};

struct FLResult {
    ModelParams params;
    RoundHistory history;
};

struct WeightedParams {
    ModelParams params;
    double weight = 0.0;
};

struct EvalReport {
    std::vector<std::pair<std::string, double>> per_client_f1;
    double mean_f1 = 0.0;
    double std_f1 = 0.0; // population

    static EvalReport from_scores(std::vector<std::pair<std::string, double>> scores);
};

// Weighted mean of the contributions, accumulated as a running mean in the
// given order; identical inputs come back bit-identical.
ModelParams fedavg(std::span<const WeightedParams> contributions);

// Seed of the initial global model for an experiment seed. Every topology
// starts from init_mlp(dim, classes, initial_model_seed(seed)).
std::uint64_t initial_model_seed(std::uint64_t seed);

// Seed for client `client` in round `round` (both 0-based).
std::uint64_t client_round_seed(std::uint64_t seed, int round, int client);

// Each round: broadcast, train_local on every client for local_epochs, then
// FedAvg weighted by train sample counts. History F1 is measured on
// `eval_devices` (the clients themselves when empty).
FLResult run_federated(std::span<const DeviceDataset> clients, const FLConfig& config,
                       std::span<const DeviceDataset> eval_devices = {});

// One aggregator per partition group trains on its members' pooled data; the
// history is measured on the devices, which all receive the global model.
FLResult run_three_tier(std::span<const DeviceDataset> devices, const Partition& partition, const FLConfig& config);

// train_local once on every device's pooled train split for `epochs`
// (config.max_epochs when negative).
LocalTrainResult run_centralized(std::span<const DeviceDataset> devices, const TrainConfig& config,
                                 std::uint64_t seed, int epochs = -1);

EvalReport evaluate_on_clients(const ModelParams& params, std::span<const DeviceDataset> devices, F1Averaging mode,
                               EvalSplit split = EvalSplit::test);

// As evaluate_on_clients; throws std::invalid_argument if any unseen device id
// appears in `training_ids`.
EvalReport evaluate_generalization(const ModelParams& params, std::span<const DeviceDataset> unseen_devices,
                                   F1Averaging mode, std::span<const std::string> training_ids);

} // namespace fedgroup
