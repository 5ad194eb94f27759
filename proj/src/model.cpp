#include "fedgroup/model.hpp"

#include "fedgroup/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "parameter files assume a little-endian host");

namespace fedgroup {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'M', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

struct ForwardPass {
    Eigen::MatrixXd hidden;    // tanh activations
    Eigen::MatrixXd log_probs; // log-softmax of the logits
};

ForwardPass run_forward(const ModelParams& p, const Eigen::MatrixXd& x)
{
    if (static_cast<std::size_t>(x.cols()) != p.input_dim())
        throw std::invalid_argument("feature dimension " + std::to_string(x.cols()) + " does not match model input " +
                                    std::to_string(p.input_dim()));
    ForwardPass out;
    out.hidden = ((x * p.w1).rowwise() + p.b1.transpose()).array().tanh().matrix();
    Eigen::MatrixXd logits = (out.hidden * p.w2).rowwise() + p.b2.transpose();
    const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
    logits.colwise() -= row_max;
    const Eigen::VectorXd log_norm = logits.array().exp().rowwise().sum().log().matrix();
    logits.colwise() -= log_norm;
    out.log_probs = std::move(logits);
    return out;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg)
{
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        theta.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
    };
    update(params.w1, grads.w1, state.m.w1, state.v.w1);
    update(params.b1, grads.b1, state.m.b1, state.v.b1);
    update(params.w2, grads.w2, state.m.w2, state.v.w2);
    update(params.b2, grads.b2, state.m.b2, state.v.b2);
}

template <class T> void put(std::string& out, const T& v)
{
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T> T take(const std::string& in, std::size_t& at)
{
    if (at + sizeof(T) > in.size())
        throw DataError("truncated parameter file");
    T v;
    std::memcpy(&v, in.data() + at, sizeof(T));
    at += sizeof(T);
    return v;
}

} // namespace

std::size_t ModelParams::parameter_count() const
{
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

bool ModelParams::same_shape(const ModelParams& o) const
{
    return w1.rows() == o.w1.rows() && w1.cols() == o.w1.cols() && b1.size() == o.b1.size() &&
           w2.rows() == o.w2.rows() && w2.cols() == o.w2.cols() && b2.size() == o.b2.size();
}

bool ModelParams::all_finite() const
{
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

ModelParams ModelParams::zeros_like(const ModelParams& like)
{
    return {Eigen::MatrixXd::Zero(like.w1.rows(), like.w1.cols()), Eigen::VectorXd::Zero(like.b1.size()),
            Eigen::MatrixXd::Zero(like.w2.rows(), like.w2.cols()), Eigen::VectorXd::Zero(like.b2.size())};
}

bool ModelParams::operator==(const ModelParams& o) const
{
    return same_shape(o) && w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
}

void TrainConfig::validate() const
{
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("learning rate must be positive");
    if (batch_size < 1)
        throw std::invalid_argument("batch size must be at least 1");
    if (max_epochs < 1)
        throw std::invalid_argument("max_epochs must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0))
        throw std::invalid_argument("Adam epsilon must be positive");
}

ModelParams init_mlp(std::size_t input_dim, std::size_t classes, std::uint64_t seed, std::size_t hidden)
{
    if (input_dim < 1)
        throw std::invalid_argument("input dimension must be at least 1");
    if (classes < 2)
        throw std::invalid_argument("a classifier needs at least two classes");
    if (hidden < 1)
        throw std::invalid_argument("hidden layer must have at least one unit");

    std::mt19937_64 rng(seed);
    auto fill = [&](Eigen::MatrixXd& m, std::size_t fan_in) {
        std::uniform_real_distribution<double> u(-std::sqrt(3.0 / static_cast<double>(fan_in)),
                                                 std::sqrt(3.0 / static_cast<double>(fan_in)));
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                m(r, c) = u(rng);
    };
    ModelParams p;
    p.w1.resize(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(hidden));
    p.w2.resize(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(classes));
    fill(p.w1, input_dim);
    fill(p.w2, hidden);
    p.b1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden));
    p.b2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes));
    return p;
}

Eigen::MatrixXd forward(const ModelParams& params, const Eigen::MatrixXd& features)
{
    // Floor at the smallest normal double so rows stay strictly positive.
    return run_forward(params, features).log_probs.array().exp().max(std::numeric_limits<double>::min()).matrix();
}

LossAndGrads loss_and_grads(const ModelParams& params, const Eigen::MatrixXd& features, std::span<const int> labels)
{
    const auto n = features.rows();
    if (static_cast<std::size_t>(n) != labels.size())
        throw std::invalid_argument("feature rows and labels differ in length");
    if (n == 0)
        throw std::invalid_argument("loss of an empty batch");

    const auto pass = run_forward(params, features);
    const auto classes = static_cast<int>(params.classes());

    // dL/dlogits = (softmax - onehot) / n
    Eigen::MatrixXd delta = pass.log_probs.array().exp().matrix();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= classes)
            throw std::invalid_argument("label " + std::to_string(y) + " outside the class range");
        loss -= pass.log_probs(i, y);
        delta(i, y) -= 1.0;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    delta *= inv_n;

    LossAndGrads out;
    out.loss = loss * inv_n;
    out.grads.w2 = pass.hidden.transpose() * delta;
    out.grads.b2 = delta.colwise().sum().transpose();
    const Eigen::MatrixXd dz1 =
        ((delta * params.w2.transpose()).array() * (1.0 - pass.hidden.array().square())).matrix();
    out.grads.w1 = features.transpose() * dz1;
    out.grads.b1 = dz1.colwise().sum().transpose();
    return out;
}

LocalTrainResult train_local(const ModelParams& params, const Split& train, const TrainConfig& config, int epochs,
                             AdamState* state)
{
    config.validate();
    if (epochs < 0 || epochs > config.max_epochs)
        throw std::invalid_argument("epochs must lie in [0, max_epochs]");
    LocalTrainResult out{params, {}};
    if (epochs == 0)
        return out;
    if (train.empty())
        throw std::invalid_argument("cannot train on an empty split");

    AdamState local{ModelParams::zeros_like(params), ModelParams::zeros_like(params), 0};
    AdamState& adam = state ? *state : local;
    if (state && !adam.m.same_shape(params))
        adam = local;

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    Eigen::MatrixXd batch_x;
    std::vector<int> batch_y;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, order.size() - start);
            batch_x.resize(static_cast<Eigen::Index>(len), train.features.cols());
            batch_y.resize(len);
            for (std::size_t r = 0; r < len; ++r) {
                batch_x.row(static_cast<Eigen::Index>(r)) = train.features.row(static_cast<Eigen::Index>(order[start + r]));
                batch_y[r] = train.labels[order[start + r]];
            }
            auto lg = loss_and_grads(out.params, batch_x, batch_y);
            loss_sum += lg.loss * static_cast<double>(len);
            adam_step(out.params, lg.grads, adam, config);
        }
        out.epoch_losses.push_back(loss_sum / static_cast<double>(order.size()));
    }
    if (!out.params.all_finite())
        throw std::runtime_error("training produced non-finite parameters");
    return out;
}

std::vector<int> predict(const ModelParams& params, const Eigen::MatrixXd& features)
{
    const auto pass = run_forward(params, features);
    std::vector<int> out(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        Eigen::Index arg = 0;
        pass.log_probs.row(i).maxCoeff(&arg);
        out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
}

F1Averaging parse_averaging(const std::string& name)
{
    if (name == "macro")
        return F1Averaging::macro;
    if (name == "weighted")
        return F1Averaging::weighted;
    throw std::invalid_argument("unknown F1 averaging '" + name + "' (expected macro or weighted)");
}

std::string to_string(F1Averaging mode)
{
    return mode == F1Averaging::macro ? "macro" : "weighted";
}

double f1_from_confusion(const std::vector<std::vector<std::uint64_t>>& confusion, F1Averaging mode)
{
    const std::size_t k = confusion.size();
    double weighted_sum = 0.0;
    double weight_total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        if (confusion[c].size() != k)
            throw std::invalid_argument("confusion matrix is not square");
        std::uint64_t support = 0;
        std::uint64_t predicted = 0;
        for (std::size_t j = 0; j < k; ++j) {
            support += confusion[c][j];
            predicted += confusion[j][c];
        }
        if (support == 0)
            continue;
        const auto tp = static_cast<double>(confusion[c][c]);
        const double fp = static_cast<double>(predicted) - tp;
        const double fn = static_cast<double>(support) - tp;
        const double f1 = 2.0 * tp / (2.0 * tp + fp + fn);
        const double w = mode == F1Averaging::macro ? 1.0 : static_cast<double>(support);
        weighted_sum += w * f1;
        weight_total += w;
    }
    if (weight_total == 0.0)
        throw std::invalid_argument("F1 of an empty confusion matrix");
    return weighted_sum / weight_total;
}

double evaluate_f1(const ModelParams& params, const Split& test, F1Averaging mode)
{
    if (test.empty())
        throw std::invalid_argument("cannot evaluate F1 on an empty split");
    const auto k = params.classes();
    std::vector<std::vector<std::uint64_t>> confusion(k, std::vector<std::uint64_t>(k, 0));
    const auto predicted = predict(params, test.features);
    for (std::size_t i = 0; i < test.size(); ++i) {
        const int y = test.labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw std::invalid_argument("test label outside the model's classes");
        ++confusion[y][predicted[i]];
    }
    return f1_from_confusion(confusion, mode);
}

std::string serialize_params(const ModelParams& p)
{
    std::string out(kMagic, sizeof kMagic);
    put(out, kFormatVersion);
    put(out, static_cast<std::uint64_t>(p.input_dim()));
    put(out, static_cast<std::uint64_t>(p.hidden()));
    put(out, static_cast<std::uint64_t>(p.classes()));
    auto put_row_major = [&](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                put(out, m(r, c));
    };
    put_row_major(p.w1);
    put_row_major(p.b1);
    put_row_major(p.w2);
    put_row_major(p.b2);
    return out;
}

ModelParams deserialize_params(const std::string& bytes)
{
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw DataError("not a parameter file (bad magic)");
    std::size_t at = sizeof kMagic;
    const auto version = take<std::uint32_t>(bytes, at);
    if (version != kFormatVersion)
        throw DataError("unsupported parameter file version " + std::to_string(version));
    const auto in = take<std::uint64_t>(bytes, at);
    const auto hidden = take<std::uint64_t>(bytes, at);
    const auto classes = take<std::uint64_t>(bytes, at);
    const std::uint64_t expected = (in * hidden + hidden + hidden * classes + classes) * sizeof(double);
    if (in == 0 || hidden == 0 || classes < 2 || bytes.size() - at != expected)
        throw DataError("parameter file shape does not match its size");

    ModelParams p;
    p.w1.resize(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(hidden));
    p.b1.resize(static_cast<Eigen::Index>(hidden));
    p.w2.resize(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(classes));
    p.b2.resize(static_cast<Eigen::Index>(classes));
    auto take_row_major = [&](auto& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                m(r, c) = take<double>(bytes, at);
    };
    take_row_major(p.w1);
    take_row_major(p.b1);
    take_row_major(p.w2);
    take_row_major(p.b2);
    return p;
}

void save_params(const ModelParams& params, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    const auto bytes = serialize_params(params);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw DataError("failed writing '" + path.string() + "'");
}

ModelParams load_params(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_params(buf.str());
}

} // namespace fedgroup
