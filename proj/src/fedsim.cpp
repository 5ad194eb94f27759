#include "fedgroup/fedsim.hpp"

#include "fedgroup/rng.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fedgroup {

namespace {

std::size_t class_count(std::span<const DeviceDataset> devices)
{
    const auto k = devices.front().label_counts.size();
    for (const auto& d : devices)
        if (d.label_counts.size() != k)
            throw std::invalid_argument("devices use different class alphabets");
    return k;
}

const Split& pick(const DeviceDataset& d, EvalSplit split)
{
    return split == EvalSplit::val ? d.val : d.test;
}

} // namespace

void FLConfig::validate() const
{
    train.validate();
    if (rounds < 1)
        throw std::invalid_argument("rounds must be at least 1");
    if (local_epochs < 1 || local_epochs > train.max_epochs)
        throw std::invalid_argument("local_epochs must lie in [1, max_epochs]");
    if (early_stop && patience < 1)
        throw std::invalid_argument("patience must be at least 1");
    if (checkpoint_every < 0)
        throw std::invalid_argument("checkpoint_every must be non-negative");
}

std::string RoundHistory::to_csv() const
{
    std::ostringstream out;
    out << "round,mean_f1,std_f1";
    for (const auto& id : client_ids)
        out << ',' << csv::quote("loss_" + id);
    out << '\n';
    for (const auto& r : records) {
        out << r.round << ',' << csv::format_double(r.mean_f1) << ',' << csv::format_double(r.std_f1);
        for (double l : r.client_losses)
            out << ',' << csv::format_double(l);
        out << '\n';
    }
    return out.str();
}

EvalReport EvalReport::from_scores(std::vector<std::pair<std::string, double>> scores)
{
    if (scores.empty())
        throw std::invalid_argument("evaluation report over zero devices");
    EvalReport r;
    r.per_client_f1 = std::move(scores);
    const auto n = static_cast<double>(r.per_client_f1.size());
    for (const auto& [id, f1] : r.per_client_f1)
        r.mean_f1 += f1;
    r.mean_f1 /= n;
    double var = 0.0;
    for (const auto& [id, f1] : r.per_client_f1)
        var += (f1 - r.mean_f1) * (f1 - r.mean_f1);
    r.std_f1 = std::sqrt(var / n);
    return r;
}

ModelParams fedavg(std::span<const WeightedParams> contributions)
{
    if (contributions.empty())
        throw std::invalid_argument("fedavg over zero contributions");
    const auto& first = contributions.front();
    for (const auto& c : contributions) {
        if (!c.params.same_shape(first.params))
            throw std::invalid_argument("fedavg: parameter shapes differ");
        if (!(c.weight > 0.0) || !std::isfinite(c.weight))
            throw std::invalid_argument("fedavg: weights must be positive and finite");
    }

    // mean += (w_i / W_i) (theta_i - mean), with W_i the running weight.
    ModelParams mean = first.params;
    double total = first.weight;
    for (std::size_t i = 1; i < contributions.size(); ++i) {
        const auto& c = contributions[i];
        total += c.weight;
        const double f = c.weight / total;
        mean.w1 += f * (c.params.w1 - mean.w1);
        mean.b1 += f * (c.params.b1 - mean.b1);
        mean.w2 += f * (c.params.w2 - mean.w2);
        mean.b2 += f * (c.params.b2 - mean.b2);
    }
    return mean;
}

std::uint64_t initial_model_seed(std::uint64_t seed)
{
    return derive_seed(seed, {0x1417});
}

std::uint64_t client_round_seed(std::uint64_t seed, int round, int client)
{
    return derive_seed(seed, {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(client)});
}

FLResult run_federated(std::span<const DeviceDataset> clients, const FLConfig& config,
                       std::span<const DeviceDataset> eval_devices)
{
    config.validate();
    if (clients.empty())
        throw std::invalid_argument("federated training needs at least one client");
    if (eval_devices.empty())
        eval_devices = clients;
    const auto classes = class_count(clients);
    for (const auto& c : clients)
        if (c.train.empty())
            throw std::invalid_argument("client '" + c.id + "' has an empty train split");

    FLResult result;
    result.params = init_mlp(clients.front().dim(), classes, initial_model_seed(config.seed));
    for (const auto& c : clients)
        result.history.client_ids.push_back(c.id);

    std::vector<AdamState> adam(config.persist_adam ? clients.size() : 0);
    std::vector<WeightedParams> contributions(clients.size());
    double best_f1 = -1.0;
    int stale = 0;

    for (int round = 0; round < config.rounds; ++round) {
        RoundRecord record;
        record.round = round + 1;
        for (std::size_t c = 0; c < clients.size(); ++c) {
            TrainConfig local = config.train;
            local.seed = client_round_seed(config.seed, round, static_cast<int>(c));
            LocalTrainResult trained;
            try {
                trained = train_local(result.params, clients[c].train, local, config.local_epochs,
                                      config.persist_adam ? &adam[c] : nullptr);
            } catch (const std::exception& e) {
                throw std::runtime_error("client '" + clients[c].id + "', round " + std::to_string(round + 1) +
                                         ": " + e.what());
            }
            record.client_losses.push_back(trained.epoch_losses.back());
            contributions[c] = {std::move(trained.params), static_cast<double>(clients[c].train.size())};
        }
        result.params = fedavg(contributions);

        const auto report = evaluate_on_clients(result.params, eval_devices, config.averaging, config.history_split);
        record.mean_f1 = report.mean_f1;
        record.std_f1 = report.std_f1;
        result.history.records.push_back(std::move(record));

        const bool last = round + 1 == config.rounds;
        if (!config.checkpoint_dir.empty() && config.checkpoint_every > 0 &&
            ((round + 1) % config.checkpoint_every == 0 || last)) {
            const auto dir = config.checkpoint_dir / ("round_" + std::to_string(round + 1));
            std::filesystem::create_directories(dir);
            save_params(result.params, dir / "params.bin");
        }

        if (config.early_stop) {
            if (report.mean_f1 > best_f1 + config.min_delta) {
                best_f1 = report.mean_f1;
                stale = 0;
            } else if (++stale >= config.patience) {
                break;
            }
        }
    }
    return result;
}

FLResult run_three_tier(std::span<const DeviceDataset> devices, const Partition& partition, const FLConfig& config)
{
    if (partition.device_count() != static_cast<int>(devices.size()))
        throw std::invalid_argument("partition covers " + std::to_string(partition.device_count()) +
                                    " devices but " + std::to_string(devices.size()) + " were given");
    std::vector<DeviceDataset> aggregators;
    aggregators.reserve(partition.group_count());
    std::vector<const DeviceDataset*> members;
    for (const auto& group : partition.groups()) {
        members.clear();
        for (int d : group)
            members.push_back(&devices[d]);
        aggregators.push_back(pool_datasets(std::span<const DeviceDataset* const>(members)));
    }
    return run_federated(aggregators, config, devices);
}

LocalTrainResult run_centralized(std::span<const DeviceDataset> devices, const TrainConfig& config,
                                 std::uint64_t seed, int epochs)
{
    if (devices.empty())
        throw std::invalid_argument("centralized training needs at least one device");
    const auto pooled = pool_datasets(devices);
    const auto init = init_mlp(pooled.dim(), class_count(devices), initial_model_seed(seed));
    TrainConfig cfg = config;
    cfg.seed = derive_seed(seed, {0xCE47});
    return train_local(init, pooled.train, cfg, epochs < 0 ? cfg.max_epochs : epochs);
}

EvalReport evaluate_on_clients(const ModelParams& params, std::span<const DeviceDataset> devices, F1Averaging mode,
                               EvalSplit split)
{
    std::vector<std::pair<std::string, double>> scores;
    scores.reserve(devices.size());
    for (const auto& d : devices) {
        if (pick(d, split).empty())
            throw std::invalid_argument("device '" + d.id + "' has an empty " +
                                        (split == EvalSplit::val ? "validation" : "test") + " split");
        scores.emplace_back(d.id, evaluate_f1(params, pick(d, split), mode));
    }
    return EvalReport::from_scores(std::move(scores));
}

EvalReport evaluate_generalization(const ModelParams& params, std::span<const DeviceDataset> unseen_devices,
                                   F1Averaging mode, std::span<const std::string> training_ids)
{
    for (const auto& d : unseen_devices)
        if (std::find(training_ids.begin(), training_ids.end(), d.id) != training_ids.end())
            throw std::invalid_argument("device '" + d.id + "' was used in training");
    return evaluate_on_clients(params, unseen_devices, mode, EvalSplit::test);
}

} // namespace fedgroup
