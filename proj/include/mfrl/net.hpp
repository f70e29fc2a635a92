#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfrl/env.hpp"

namespace mfrl {

/// Layer widths of the shared-trunk actor-critic:
/// input -> hidden1 -> hidden2 -> {N logits, mu, log-sigma}
///                            \-> critic_hidden -> value
struct Topology {
    int input = 12;
    int hidden1 = 512;
    int hidden2 = 256;
    int n_channels = 10;
    int critic_hidden = 128;

    static Topology for_subchannels(int n_subchannels) { return {n_subchannels + 2, 512, 256, n_subchannels, 128}; }

    [[nodiscard]] std::size_t param_count() const {
        auto dense = [](int in, int out) { return static_cast<std::size_t>(in) * out + out; };
        return dense(input, hidden1) + dense(hidden1, hidden2) + dense(hidden2, n_channels) + 2 * dense(hidden2, 1) +
               dense(hidden2, critic_hidden) + dense(critic_hidden, 1);
    }

    bool operator==(const Topology&) const = default;
};

/// Flat parameter vector plus its topology. Layout (each matrix column-major,
/// out x in): W1 b1 W2 b2 Wlogit blogit wmu bmu wsigma bsigma Wc bc wv bv.
struct PolicyParams {
    Topology topology;
    Eigen::VectorXd weights;

    PolicyParams() = default;
    explicit PolicyParams(Topology t) : topology(t), weights(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.param_count()))) {}

    [[nodiscard]] bool valid() const {
        return weights.size() == static_cast<Eigen::Index>(topology.param_count()) && weights.allFinite();
    }
};

namespace net {

inline constexpr double kLogSigmaMin = -20.0;
inline constexpr double kLogSigmaMax = 2.0;

struct Offsets {
    Eigen::Index w1, b1, w2, b2, wl, bl, wm, bm, ws, bs, wc, bc, wv, bv, end;
};

inline Offsets offsets(const Topology& t) {
    Offsets o{};
    Eigen::Index at = 0;
    auto take = [&at](Eigen::Index n) {
        Eigen::Index here = at;
        at += n;
        return here;
    };
    o.w1 = take(Eigen::Index{t.hidden1} * t.input);
    o.b1 = take(t.hidden1);
    o.w2 = take(Eigen::Index{t.hidden2} * t.hidden1);
    o.b2 = take(t.hidden2);
    o.wl = take(Eigen::Index{t.n_channels} * t.hidden2);
    o.bl = take(t.n_channels);
    o.wm = take(t.hidden2);
    o.bm = take(1);
    o.ws = take(t.hidden2);
    o.bs = take(1);
    o.wc = take(Eigen::Index{t.critic_hidden} * t.hidden2);
    o.bc = take(t.critic_hidden);
    o.wv = take(t.critic_hidden);
    o.bv = take(1);
    o.end = at;
    return o;
}

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

template <typename Mat, typename V>
struct LayerViews {
    Mat w1, w2, wl, wm, ws, wc, wv;
    V b1, b2, bl, bm, bs, bc, bv;
};

template <typename Mat, typename V, typename Ptr>
auto make_views(const Topology& t, Ptr base) {
    const Offsets o = offsets(t);
    return LayerViews<Mat, V>{
        Mat(base + o.w1, t.hidden1, t.input),     Mat(base + o.w2, t.hidden2, t.hidden1),
        Mat(base + o.wl, t.n_channels, t.hidden2), Mat(base + o.wm, 1, t.hidden2),
        Mat(base + o.ws, 1, t.hidden2),            Mat(base + o.wc, t.critic_hidden, t.hidden2),
        Mat(base + o.wv, 1, t.critic_hidden),      V(base + o.b1, t.hidden1),
        V(base + o.b2, t.hidden2),                 V(base + o.bl, t.n_channels),
        V(base + o.bm, 1),                         V(base + o.bs, 1),
        V(base + o.bc, t.critic_hidden),           V(base + o.bv, 1)};
}

inline auto views(const PolicyParams& p) { return make_views<ConstMatMap, ConstVecMap>(p.topology, p.weights.data()); }
inline auto views(const Topology& t, Eigen::VectorXd& flat) { return make_views<MatMap, VecMap>(t, flat.data()); }

/// Activations of a batch, one column per sample; kept for the backward pass.
struct BatchCache {
    Eigen::MatrixXd x;
    Eigen::MatrixXd a1;
    Eigen::MatrixXd a2;
    Eigen::MatrixXd logits;
    Eigen::RowVectorXd mu;
    Eigen::RowVectorXd log_sigma_raw;
    Eigen::RowVectorXd log_sigma;
    Eigen::MatrixXd ac;
    Eigen::RowVectorXd value;

    [[nodiscard]] Eigen::Index batch() const { return x.cols(); }
};

struct ForwardOutput {
    Eigen::VectorXd channel_logits;
    double mu = 0.0;
    double log_sigma = 0.0;
    double value = 0.0;
};

inline BatchCache forward_batch(const PolicyParams& params, const Eigen::MatrixXd& x) {
    const Topology& t = params.topology;
    if (x.rows() != t.input) throw std::invalid_argument("forward: observation dimension does not match topology");
    auto v = views(params);
    BatchCache c;
    c.x = x;
    c.a1 = ((v.w1 * x).colwise() + v.b1).array().tanh().matrix();
    c.a2 = ((v.w2 * c.a1).colwise() + v.b2).array().tanh().matrix();
    c.logits = (v.wl * c.a2).colwise() + v.bl;
    c.mu = (v.wm * c.a2).array() + v.bm(0);
    c.log_sigma_raw = (v.ws * c.a2).array() + v.bs(0);
    c.log_sigma = c.log_sigma_raw.array().max(kLogSigmaMin).min(kLogSigmaMax).matrix();
    c.ac = ((v.wc * c.a2).colwise() + v.bc).array().tanh().matrix();
    c.value = (v.wv * c.ac).array() + v.bv(0);
    return c;
}

inline Eigen::MatrixXd stack_observations(std::span<const Observation> obs, int dim) {
    Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(obs.size()));
    for (std::size_t j = 0; j < obs.size(); ++j) {
        if (static_cast<int>(obs[j].features.size()) != dim)
            throw std::invalid_argument("forward: observation dimension does not match topology");
        x.col(static_cast<Eigen::Index>(j)) = ConstVecMap(obs[j].features.data(), dim);
    }
    return x;
}

inline ForwardOutput forward(const PolicyParams& params, const Observation& obs) {
    BatchCache c = forward_batch(params, stack_observations(std::span(&obs, 1), params.topology.input));
    return {c.logits.col(0), c.mu(0), c.log_sigma(0), c.value(0)};
}

inline Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return logits.array() - lse;
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) { return log_softmax(logits).array().exp(); }

inline double categorical_entropy(const Eigen::VectorXd& logits) {
    Eigen::VectorXd lp = log_softmax(logits);
    return -(lp.array().exp() * lp.array()).sum();
}

inline double gaussian_log_prob(double x, double mu, double log_sigma) {
    const double z = (x - mu) * std::exp(-log_sigma);
    return -0.5 * z * z - log_sigma - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double gaussian_entropy(double log_sigma) { return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) + log_sigma; }

struct SampledAction {
    Action action;
    double log_prob_channel = 0.0;
    double log_prob_power = 0.0;
    double entropy_channel = 0.0;
    double entropy_power = 0.0;
};

/// Draws a subchannel from the categorical head and a raw power from the
/// Gaussian head. Log-probabilities use the unclipped Gaussian density.
inline SampledAction sample_action(const ForwardOutput& out, const ScenarioConfig& scenario, Rng& rng) {
    SampledAction s;
    Eigen::VectorXd lp = log_softmax(out.channel_logits);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double u = u01(rng);
    double acc = 0.0;
    int pick = static_cast<int>(lp.size()) - 1;
    for (Eigen::Index k = 0; k < lp.size(); ++k) {
        acc += std::exp(lp(k));
        if (u < acc) {
            pick = static_cast<int>(k);
            break;
        }
    }
    std::normal_distribution<double> gauss(out.mu, std::exp(out.log_sigma));
    s.action.channel = pick;
    s.action.power_raw = gauss(rng);
    s.action.power_w = map_power_w(scenario, s.action.power_raw);
    s.log_prob_channel = lp(pick);
    s.log_prob_power = gaussian_log_prob(s.action.power_raw, out.mu, out.log_sigma);
    s.entropy_channel = -(lp.array().exp() * lp.array()).sum();
    s.entropy_power = gaussian_entropy(out.log_sigma);
    return s;
}

/// Deterministic action: most likely subchannel, power at the Gaussian mean.
inline Action greedy_action(const ForwardOutput& out, const ScenarioConfig& scenario) {
    Action a;
    Eigen::Index best = 0;
    out.channel_logits.maxCoeff(&best);
    a.channel = static_cast<int>(best);
    a.power_raw = out.mu;
    a.power_w = map_power_w(scenario, out.mu);
    return a;
}

/// Loss gradients with respect to every head output, one column per sample.
struct HeadGrads {
    Eigen::MatrixXd d_logits;
    Eigen::RowVectorXd d_mu;
    Eigen::RowVectorXd d_log_sigma;
    Eigen::RowVectorXd d_value;

    static HeadGrads zeros(const Topology& t, Eigen::Index batch) {
        return {Eigen::MatrixXd::Zero(t.n_channels, batch), Eigen::RowVectorXd::Zero(batch),
                Eigen::RowVectorXd::Zero(batch), Eigen::RowVectorXd::Zero(batch)};
    }
};

/// Reverse-mode pass through the network for the given head gradients.
inline Eigen::VectorXd backward(const PolicyParams& params, const BatchCache& c, const HeadGrads& g) {
    const Topology& t = params.topology;
    auto v = views(params);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.param_count()));
    auto d = views(t, grad);

    // log-sigma is clamped in the forward pass; no gradient past the clamp
    Eigen::RowVectorXd d_ls = g.d_log_sigma;
    for (Eigen::Index j = 0; j < d_ls.size(); ++j)
        if (c.log_sigma_raw(j) < kLogSigmaMin || c.log_sigma_raw(j) > kLogSigmaMax) d_ls(j) = 0.0;

    // critic branch
    d.wv = g.d_value * c.ac.transpose();
    d.bv(0) = g.d_value.sum();
    Eigen::MatrixXd dzc = ((v.wv.transpose() * g.d_value).array() * (1.0 - c.ac.array().square())).matrix();
    d.wc = dzc * c.a2.transpose();
    d.bc = dzc.rowwise().sum();

    // actor heads
    d.wl = g.d_logits * c.a2.transpose();
    d.bl = g.d_logits.rowwise().sum();
    d.wm = g.d_mu * c.a2.transpose();
    d.bm(0) = g.d_mu.sum();
    d.ws = d_ls * c.a2.transpose();
    d.bs(0) = d_ls.sum();

    // shared trunk
    Eigen::MatrixXd da2 = v.wl.transpose() * g.d_logits + v.wm.transpose() * g.d_mu + v.ws.transpose() * d_ls +
                          v.wc.transpose() * dzc;
    Eigen::MatrixXd dz2 = (da2.array() * (1.0 - c.a2.array().square())).matrix();
    d.w2 = dz2 * c.a1.transpose();
    d.b2 = dz2.rowwise().sum();
    Eigen::MatrixXd dz1 = ((v.w2.transpose() * dz2).array() * (1.0 - c.a1.array().square())).matrix();
    d.w1 = dz1 * c.x.transpose();
    d.b1 = dz1.rowwise().sum();
    return grad;
}

/// Gradient of log pi(a|o) for one observation/action pair.
inline Eigen::VectorXd grad_log_prob(const PolicyParams& params, const Observation& obs, int channel, double power_raw) {
    BatchCache c = forward_batch(params, stack_observations(std::span(&obs, 1), params.topology.input));
    HeadGrads g = HeadGrads::zeros(params.topology, 1);
    Eigen::VectorXd p = softmax(c.logits.col(0));
    g.d_logits.col(0) = -p;
    g.d_logits(channel, 0) += 1.0;
    const double inv_var = std::exp(-2.0 * c.log_sigma(0));
    const double diff = power_raw - c.mu(0);
    g.d_mu(0) = diff * inv_var;
    g.d_log_sigma(0) = diff * diff * inv_var - 1.0;
    return backward(params, c, g);
}

/// Random initialisation: orthogonal hidden layers (gain sqrt 2), actor heads
/// with gain 0.01, value head with gain 1, zero biases.
inline PolicyParams init_params(const Topology& t, Rng& rng) {
    PolicyParams p(t);
    auto d = views(t, p.weights);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto orthogonal = [&](auto& target, double gain) {
        const Eigen::Index rows = target.rows();
        const Eigen::Index cols = target.cols();
        const Eigen::Index big = std::max(rows, cols);
        const Eigen::Index small = std::min(rows, cols);
        Eigen::MatrixXd a(big, small);
        for (Eigen::Index j = 0; j < small; ++j)
            for (Eigen::Index i = 0; i < big; ++i) a(i, j) = normal(rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
        // sign fix so the draw is uniform over the orthogonal group
        Eigen::VectorXd diag = qr.matrixQR().diagonal();
        for (Eigen::Index j = 0; j < small; ++j)
            if (diag(j) < 0.0) q.col(j) *= -1.0;
        if (rows >= cols) target = gain * q;
        else target = gain * q.transpose();
    };
    orthogonal(d.w1, std::sqrt(2.0));
    orthogonal(d.w2, std::sqrt(2.0));
    orthogonal(d.wl, 0.01);
    orthogonal(d.wm, 0.01);
    orthogonal(d.ws, 0.01);
    orthogonal(d.wc, std::sqrt(2.0));
    orthogonal(d.wv, 1.0);
    return p;
}

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
    AdamConfig config;

    OptimizerState() = default;
    OptimizerState(Eigen::Index n, AdamConfig cfg)
        : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)), config(cfg) {}
};

/// Bias-corrected Adam step that descends `grad`.
inline void adam_step(PolicyParams& params, OptimizerState& st, const Eigen::VectorXd& grad) {
    if (grad.size() != params.weights.size() || st.m.size() != grad.size())
        throw std::invalid_argument("adam_step: dimension mismatch");
    const AdamConfig& c = st.config;
    ++st.step;
    st.m = c.beta1 * st.m + (1.0 - c.beta1) * grad;
    st.v = c.beta2 * st.v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
    params.weights.array() -= c.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + c.eps);
}

// Parameter file: 8-byte magic "MFRLNET1", five little-endian int32 layer
// widths (input, hidden1, hidden2, n_channels, critic_hidden), a uint64
// weight count, then the weights as little-endian IEEE-754 doubles.
inline constexpr char kMagic[8] = {'M', 'F', 'R', 'L', 'N', 'E', 'T', '1'};

namespace detail {
inline void put_le(std::ostream& out, std::uint64_t v, int bytes) {
    for (int k = 0; k < bytes; ++k) out.put(static_cast<char>((v >> (8 * k)) & 0xffu));
}
inline std::uint64_t get_le(std::istream& in, int bytes) {
    std::uint64_t v = 0;
    for (int k = 0; k < bytes; ++k) {
        int ch = in.get();
        if (ch == std::char_traits<char>::eof()) throw std::runtime_error("parameter file truncated");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * k);
    }
    return v;
}
}  // namespace detail

inline void save_params(const PolicyParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(kMagic, sizeof kMagic);
    const Topology& t = p.topology;
    for (int w : {t.input, t.hidden1, t.hidden2, t.n_channels, t.critic_hidden})
        detail::put_le(out, static_cast<std::uint32_t>(w), 4);
    detail::put_le(out, static_cast<std::uint64_t>(p.weights.size()), 8);
    for (Eigen::Index k = 0; k < p.weights.size(); ++k) detail::put_le(out, std::bit_cast<std::uint64_t>(p.weights(k)), 8);
    if (!out) throw std::runtime_error("failed writing " + path);
}

inline PolicyParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, kMagic)) throw std::runtime_error(path + " is not a parameter file");
    Topology t;
    int* fields[] = {&t.input, &t.hidden1, &t.hidden2, &t.n_channels, &t.critic_hidden};
    for (int* f : fields) *f = static_cast<int>(static_cast<std::int32_t>(detail::get_le(in, 4)));
    const auto count = detail::get_le(in, 8);
    if (count != t.param_count()) throw std::runtime_error(path + ": weight count does not match topology");
    PolicyParams p(t);
    for (Eigen::Index k = 0; k < p.weights.size(); ++k) p.weights(k) = std::bit_cast<double>(detail::get_le(in, 8));
    return p;
}

}  // namespace net
}  // namespace mfrl
