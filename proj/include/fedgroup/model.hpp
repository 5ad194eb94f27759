#pragma once

// One-hidden-layer tanh MLP with softmax output, trained with Adam on mean
// cross-entropy, plus F1 evaluation.

#include "fedgroup/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fedgroup {

inline constexpr std::size_t kHiddenUnits = 64;

struct ModelParams {
    Eigen::MatrixXd w1; // input_dim x hidden
    Eigen::VectorXd b1; // hidden
    Eigen::MatrixXd w2; // hidden x classes
    Eigen::VectorXd b2; // classes

    std::size_t input_dim() const { return static_cast<std::size_t>(w1.rows()); }
    std::size_t hidden() const { return static_cast<std::size_t>(w1.cols()); }
    std::size_t classes() const { return static_cast<std::size_t>(w2.cols()); }
    std::size_t parameter_count() const;

    bool same_shape(const ModelParams& o) const;
    bool all_finite() const;

    // Zeros with the shape of `like`.
    static ModelParams zeros_like(const ModelParams& like);

    // Visits the four tensors in (w1, b1, w2, b2) order as flat spans.
    template <class F> void for_each_tensor(F&& f)
    {
        f(std::span<double>(w1.data(), static_cast<std::size_t>(w1.size())));
        f(std::span<double>(b1.data(), static_cast<std::size_t>(b1.size())));
        f(std::span<double>(w2.data(), static_cast<std::size_t>(w2.size())));
        f(std::span<double>(b2.data(), static_cast<std::size_t>(b2.size())));
    }

    bool operator==(const ModelParams& o) const;
};

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t batch_size = 512;
    int max_epochs = 15;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    std::uint64_t seed = 0;

    void validate() const;
};

// Adam moments. Reset per train_local call unless the caller keeps one.
struct AdamState {
    ModelParams m;
    ModelParams v;
    std::int64_t step = 0;
};

// Weights uniform in +-sqrt(3 / fan_in), biases zero.
ModelParams init_mlp(std::size_t input_dim, std::size_t classes, std::uint64_t seed,
                     std::size_t hidden = kHiddenUnits);

// Row-wise class probabilities for a batch of feature rows.
Eigen::MatrixXd forward(const ModelParams& params, const Eigen::MatrixXd& features);

struct LossAndGrads {
    double loss = 0.0;
    ModelParams grads;
};

LossAndGrads loss_and_grads(const ModelParams& params, const Eigen::MatrixXd& features,
                            std::span<const int> labels);

struct LocalTrainResult {
    ModelParams params;
    // Sample-weighted mean of the minibatch losses seen during each epoch.
    std::vector<double> epoch_losses;
};

// `epochs` passes of seeded shuffle + minibatch Adam over `train`. Pass a
// state to carry Adam moments across calls; otherwise they start at zero.
LocalTrainResult train_local(const ModelParams& params, const Split& train, const TrainConfig& config, int epochs,
                             AdamState* state = nullptr);

std::vector<int> predict(const ModelParams& params, const Eigen::MatrixXd& features);

enum class F1Averaging { macro, weighted };

F1Averaging parse_averaging(const std::string& name);
std::string to_string(F1Averaging mode);

// confusion[true][predicted]. Classes without support are left out of the
// average; macro is the plain mean over the rest, weighted uses support.
double f1_from_confusion(const std::vector<std::vector<std::uint64_t>>& confusion, F1Averaging mode);

double evaluate_f1(const ModelParams& params, const Split& test, F1Averaging mode);

// Little-endian binary dump: "FGMP", version, shapes, then w1, b1, w2, b2 in
// row-major order.
std::string serialize_params(const ModelParams& params);
ModelParams deserialize_params(const std::string& bytes);
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

} // namespace fedgroup
