#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mfrl/env.hpp"
#include "mfrl/net.hpp"

namespace mfrl {

struct PpoConfig {
    double xi = 0.9;
    double lambda = 0.98;
    double epsilon = 0.2;
    double c1 = 0.5;
    double c2 = 0.01;
    int epochs = 4;
    int minibatch_size = 256;
    bool normalize_advantages = true;
    /// Discount V(o') inside the critic target. false drops the factor.
    bool critic_discount_next = true;

    void validate() const {
        if (!(xi > 0.0 && xi < 1.0)) throw ConfigError("ppo.xi must lie in (0, 1)");
        if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("ppo.lambda must lie in (0, 1]");
        if (!(epsilon > 0.0)) throw ConfigError("ppo.epsilon must be positive");
        if (epochs < 1 || minibatch_size < 1) throw ConfigError("ppo.epochs and ppo.minibatch_size must be >= 1");
    }
};

namespace ppo {

/// Generalized advantage estimates by the backward recursion
/// A_t = delta_t + lambda*xi*A_{t+1}. `episode_end[t]` stops the recursion
/// (delta_t still bootstraps from next_values[t]).
inline std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                       std::span<const double> next_values, double xi, double lambda,
                                       const std::vector<bool>& episode_end = {}) {
    const std::size_t n = rewards.size();
    if (values.size() != n || next_values.size() != n || (!episode_end.empty() && episode_end.size() != n))
        throw std::invalid_argument("compute_gae: sequence lengths differ");
    std::vector<double> adv(n, 0.0);
    double running = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        if (!episode_end.empty() && episode_end[k]) running = 0.0;
        const double delta = rewards[k] + xi * next_values[k] - values[k];
        running = delta + lambda * xi * running;
        adv[k] = running;
    }
    return adv;
}

inline double clip_fn(double epsilon, double advantage) {
    return advantage >= 0.0 ? (1.0 + epsilon) * advantage : (1.0 - epsilon) * advantage;
}

inline double clipped_objective(double log_prob_new, double log_prob_old, double advantage, double epsilon) {
    const double ratio = std::exp(log_prob_new - log_prob_old);
    return std::min(ratio * advantage, clip_fn(epsilon, advantage));
}

inline double critic_loss(double reward, double value_next, double value_now, double xi) {
    const double td = reward + xi * value_next - value_now;
    return td * td;
}

}  // namespace ppo

/// One agent's on-policy experience plus the derived advantage estimates.
struct RolloutBuffer {
    std::vector<Transition> transitions;
    std::vector<double> advantages;
    bool advantages_ready = false;

    [[nodiscard]] std::size_t size() const { return transitions.size(); }
    [[nodiscard]] bool empty() const { return transitions.empty(); }

    void push(Transition t) {
        transitions.push_back(std::move(t));
        advantages_ready = false;
    }

    void clear() {
        transitions.clear();
        advantages.clear();
        advantages_ready = false;
    }

    /// Treats the buffer as consecutive steps of one agent; `done` marks
    /// episode boundaries.
    void compute_advantages(const PpoConfig& cfg) {
        std::vector<double> r, v, nv;
        std::vector<bool> ends;
        r.reserve(size());
        v.reserve(size());
        nv.reserve(size());
        ends.reserve(size());
        for (const auto& t : transitions) {
            r.push_back(t.reward);
            v.push_back(t.value_estimate);
            nv.push_back(t.next_value_estimate);
            ends.push_back(t.done);
        }
        advantages = ppo::compute_gae(r, v, nv, cfg.xi, cfg.lambda, ends);
        advantages_ready = true;
    }

    /// Moves another buffer's transitions (with their advantages) in.
    void append(RolloutBuffer&& other) {
        if (!other.advantages_ready) throw std::logic_error("append: source advantages not computed");
        if (!empty() && !advantages_ready) throw std::logic_error("append: target advantages not computed");
        transitions.insert(transitions.end(), std::make_move_iterator(other.transitions.begin()),
                           std::make_move_iterator(other.transitions.end()));
        advantages.insert(advantages.end(), other.advantages.begin(), other.advantages.end());
        advantages_ready = true;
        other.clear();
    }
};

struct LossTerms {
    double objective = 0.0;  // mean(L_clip - c1*L_cr + c2*E)
    double actor = 0.0;
    double critic = 0.0;
    double entropy = 0.0;
    double entropy_channel = 0.0;
    double mean_ratio = 0.0;
    double clip_fraction = 0.0;
};

struct LossAndGrad {
    LossTerms terms;
    /// Gradient of -objective (the quantity Adam descends).
    Eigen::VectorXd grad;
};

namespace ppo {

/// Combined PPO objective over `samples` with the given advantages and its
/// exact gradient. Reduction over the batch is the mean.
inline LossAndGrad loss_and_grad(const PolicyParams& params, std::span<const Transition* const> samples,
                                 std::span<const double> advantages, const PpoConfig& cfg, bool want_grad = true) {
    if (samples.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
    const Topology& t = params.topology;
    const auto b = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd x(t.input, b);
    for (Eigen::Index j = 0; j < b; ++j) {
        const auto& f = samples[static_cast<std::size_t>(j)]->obs.features;
        if (static_cast<int>(f.size()) != t.input) throw std::invalid_argument("loss_and_grad: observation dimension");
        x.col(j) = net::ConstVecMap(f.data(), t.input);
    }
    net::BatchCache c = net::forward_batch(params, x);
    net::HeadGrads g = net::HeadGrads::zeros(t, b);
    LossTerms terms;
    const double inv_b = 1.0 / static_cast<double>(b);
    const double next_discount = cfg.critic_discount_next ? cfg.xi : 1.0;
    for (Eigen::Index j = 0; j < b; ++j) {
        const Transition& tr = *samples[static_cast<std::size_t>(j)];
        const double adv = advantages[static_cast<std::size_t>(j)];
        Eigen::VectorXd lp = net::log_softmax(c.logits.col(j));
        Eigen::VectorXd p = lp.array().exp();
        const double log_sigma = c.log_sigma(j);
        const double inv_var = std::exp(-2.0 * log_sigma);
        const double diff = tr.action.power_raw - c.mu(j);
        const double lp_new = lp(tr.action.channel) + net::gaussian_log_prob(tr.action.power_raw, c.mu(j), log_sigma);
        const double lp_old = tr.log_prob_channel + tr.log_prob_power;
        const double ratio = std::exp(lp_new - lp_old);
        const double unclipped = ratio * adv;
        const double clipped = clip_fn(cfg.epsilon, adv);
        const double l_clip = std::min(unclipped, clipped);
        const double target = tr.reward + next_discount * tr.next_value_estimate;
        const double td = target - c.value(j);
        const double l_cr = td * td;
        const double h_cat = -(p.array() * lp.array()).sum();
        const double h_gauss = net::gaussian_entropy(log_sigma);

        terms.actor += l_clip * inv_b;
        terms.critic += l_cr * inv_b;
        terms.entropy += (h_cat + h_gauss) * inv_b;
        terms.entropy_channel += h_cat * inv_b;
        terms.mean_ratio += ratio * inv_b;
        if (std::abs(ratio - 1.0) > cfg.epsilon) terms.clip_fraction += inv_b;

        if (!want_grad) continue;
        // d(-objective)/d(head outputs), per sample, scaled by 1/B
        const double d_lp = unclipped <= clipped ? unclipped : 0.0;  // dL_clip/dlp_new
        Eigen::VectorXd dlogits = -p;
        dlogits(tr.action.channel) += 1.0;
        dlogits *= d_lp;
        // entropy: dH/dz_k = -p_k (log p_k + H)
        dlogits.array() += cfg.c2 * (-p.array() * (lp.array() + h_cat));
        g.d_logits.col(j) = -inv_b * dlogits;
        g.d_mu(j) = -inv_b * d_lp * diff * inv_var;
        g.d_log_sigma(j) = -inv_b * (d_lp * (diff * diff * inv_var - 1.0) + cfg.c2);
        g.d_value(j) = -inv_b * (cfg.c1 * 2.0 * td);
    }
    terms.objective = terms.actor - cfg.c1 * terms.critic + cfg.c2 * terms.entropy;
    LossAndGrad out{terms, {}};
    if (want_grad) out.grad = net::backward(params, c, g);
    return out;
}

inline std::vector<double> normalized(std::span<const double> adv) {
    std::vector<double> out(adv.begin(), adv.end());
    if (out.size() < 2) return out;
    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
    double var = 0.0;
    for (double a : out) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(out.size()));
    if (!(sd > 1e-12)) return out;
    for (double& a : out) a = (a - mean) / sd;
    return out;
}

}  // namespace ppo

struct UpdateDiagnostics {
    LossTerms before;
    int n_minibatches = 0;
    bool skipped_empty = false;
};

/// Several passes of shuffled minibatch ascent on the combined objective.
/// The buffer is left intact; callers clear it afterwards.
inline UpdateDiagnostics ppo_update(PolicyParams& params, net::OptimizerState& opt, const RolloutBuffer& buffer,
                                    const PpoConfig& cfg, Rng& rng) {
    UpdateDiagnostics diag;
    if (buffer.empty()) {
        diag.skipped_empty = true;
        return diag;
    }
    if (!buffer.advantages_ready || buffer.advantages.size() != buffer.size())
        throw std::logic_error("ppo_update: advantages must be computed before the update");
    const std::vector<double> adv =
        cfg.normalize_advantages ? ppo::normalized(buffer.advantages) : buffer.advantages;

    std::vector<std::size_t> order(buffer.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<const Transition*> batch;
    std::vector<double> batch_adv;
    bool first = true;
    for (int pass = 0; pass < cfg.epochs; ++pass) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.minibatch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch_size));
            batch.clear();
            batch_adv.clear();
            for (std::size_t k = start; k < stop; ++k) {
                batch.push_back(&buffer.transitions[order[k]]);
                batch_adv.push_back(adv[order[k]]);
            }
            LossAndGrad lg = ppo::loss_and_grad(params, batch, batch_adv, cfg);
            if (first) {
                diag.before = lg.terms;
                first = false;
            }
            net::adam_step(params, opt, lg.grad);
            ++diag.n_minibatches;
        }
    }
    return diag;
}

}  // namespace mfrl
