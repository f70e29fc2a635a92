#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfrl/env.hpp"
#include "mfrl/net.hpp"
#include "mfrl/ppo.hpp"
#include "mfrl/rollout.hpp"

namespace mfrl {

enum class Weighting { SizeWeighted, SuccessWeighted, None };

inline Weighting parse_weighting(const std::string& s) {
    if (s == "size") return Weighting::SizeWeighted;
    if (s == "success") return Weighting::SuccessWeighted;
    if (s == "none") return Weighting::None;
    throw ConfigError("unknown weighting '" + s + "' (expected size, success or none)");
}

inline std::string to_string(Weighting w) {
    switch (w) {
        case Weighting::SizeWeighted: return "size";
        case Weighting::SuccessWeighted: return "success";
        case Weighting::None: return "none";
    }
    return "unknown";
}

struct FedConfig {
    int averaging_period = 100;
    Weighting weighting = Weighting::SuccessWeighted;
    double adaptation_lr = 1e-6;
    int n_episodes = 1000;
    std::vector<int> checkpoint_episodes{500};
    PpoConfig ppo;
    EnvConfig env;

    void validate() const {
        if (averaging_period < 1) throw ConfigError("fed.averaging_period must be >= 1");
        if (n_episodes < 1) throw ConfigError("fed.n_episodes must be >= 1");
        ppo.validate();
    }
};

namespace fed {

namespace detail {

inline PolicyParams weighted_average(std::span<const PolicyParams> models, std::span<const double> weights) {
    if (models.empty()) throw std::invalid_argument("federated average of zero models");
    if (weights.size() != models.size()) throw std::invalid_argument("one weight per model");
    const Topology& topo = models.front().topology;
    for (const auto& m : models)
        if (!(m.topology == topo) || m.weights.size() != models.front().weights.size())
            throw std::invalid_argument("federated average: topology mismatch");
    long double total = 0.0L;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("federated average: invalid weight");
        total += w;
    }
    if (!(total > 0.0L)) throw std::invalid_argument("federated average: weights sum to zero");
    PolicyParams out(topo);
    const Eigen::Index n = out.weights.size();
    // accumulate in extended precision so the result is the correctly
    // rounded convex combination for the usual handful of models
    for (Eigen::Index k = 0; k < n; ++k) {
        long double acc = 0.0L;
        for (std::size_t i = 0; i < models.size(); ++i)
            acc += static_cast<long double>(weights[i]) * static_cast<long double>(models[i].weights(k));
        double v = static_cast<double>(acc / total);
        // the coordinate-wise hull is exact in the data; clamp the last ulp
        double lo = models.front().weights(k), hi = lo;
        for (const auto& m : models) {
            lo = std::min(lo, m.weights(k));
            hi = std::max(hi, m.weights(k));
        }
        out.weights(k) = std::clamp(v, lo, hi);
    }
    return out;
}

}  // namespace detail

/// Average weighted by local batch sizes |B_i|.
inline PolicyParams fedavg_size_weighted(std::span<const PolicyParams> models, std::span<const double> batch_sizes) {
    return detail::weighted_average(models, batch_sizes);
}

/// Average weighted by per-UE success rates eta_i. All-zero rates fall back to
/// the plain mean.
inline PolicyParams fedavg_success_weighted(std::span<const PolicyParams> models, std::span<const double> success_rates,
                                            bool* fell_back = nullptr) {
    bool all_zero = std::all_of(success_rates.begin(), success_rates.end(), [](double e) { return e == 0.0; });
    if (fell_back) *fell_back = all_zero;
    if (all_zero) {
        std::clog << "warning: every success rate is zero; using the unweighted model mean\n";
        std::vector<double> ones(models.size(), 1.0);
        return detail::weighted_average(models, ones);
    }
    return detail::weighted_average(models, success_rates);
}

struct EpisodeLog {
    int episode = 0;  // 1-based
    double reward = 0.0;
    double entropy_channel = 0.0;
    double entropy_power = 0.0;
    double mean_sum_ee = 0.0;
    double collision_rate = 0.0;
    std::vector<double> eta;
    bool averaged = false;
};

struct AdaptResult {
    std::vector<PolicyParams> local_models;
    std::vector<EpisodeLog> log;
    std::map<int, std::vector<PolicyParams>> checkpoints;
    std::vector<int> averaging_episodes;
};

using EpisodeCallback = std::function<void(const EpisodeLog&)>;

/// Local fine-tuning of per-UE copies of `initial` in one shared environment,
/// with periodic federated averaging and broadcast. Averaging runs after
/// episode j when j is a multiple of the period and more episodes follow.
inline AdaptResult adapt(const PolicyParams& initial, const TaskSpec& task, const FedConfig& cfg, std::uint64_t seed,
                         const EpisodeCallback& on_episode = {}) {
    cfg.validate();
    if (initial.topology.input != task.scenario.n_subchannels() + 2 ||
        initial.topology.n_channels != task.scenario.n_subchannels())
        throw ConfigError("adapt: network topology does not match the scenario");
    Environment env(task.scenario, cfg.env);
    // channel randomness depends only on the task seed, never on the actions
    Rng env_rng = make_stream(task.seed, 101);
    Rng policy_rng = make_stream(seed, 102);
    Rng update_rng = make_stream(seed, 103);
    env.reset(task.n_ues, env_rng);

    const auto n_ues = static_cast<std::size_t>(task.n_ues);
    AdaptResult res;
    res.local_models.assign(n_ues, initial);
    std::vector<net::OptimizerState> opts(n_ues, net::OptimizerState(initial.weights.size(), net::AdamConfig{cfg.adaptation_lr}));
    SuccessTracker round_tracker(task.n_ues);
    std::vector<double> last_batch(n_ues, 0.0);

    for (int j = 1; j <= cfg.n_episodes; ++j) {
        std::vector<const PolicyParams*> policies;
        for (const auto& m : res.local_models) policies.push_back(&m);
        EpisodeResult ep = run_episode(env, policies, env_rng, policy_rng);
        for (std::size_t i = 0; i < n_ues; ++i) round_tracker.beta[i] += ep.successes[i];
        round_tracker.total += ep.steps;

        for (std::size_t i = 0; i < n_ues; ++i) {
            ep.per_ue[i].compute_advantages(cfg.ppo);
            last_batch[i] = static_cast<double>(ep.per_ue[i].size());
            ppo_update(res.local_models[i], opts[i], ep.per_ue[i], cfg.ppo, update_rng);
        }

        EpisodeLog log;
        log.episode = j;
        log.reward = ep.total_reward;
        log.entropy_channel = ep.mean_entropy_channel;
        log.entropy_power = ep.mean_entropy_power;
        log.mean_sum_ee = ep.mean_sum_ee;
        log.collision_rate = ep.collision_rate();
        for (int i = 0; i < task.n_ues; ++i) log.eta.push_back(success_rate(round_tracker, i));

        if (cfg.weighting != Weighting::None && j % cfg.averaging_period == 0 && j < cfg.n_episodes) {
            PolicyParams avg = cfg.weighting == Weighting::SizeWeighted
                                   ? fedavg_size_weighted(res.local_models, last_batch)
                                   : fedavg_success_weighted(res.local_models, log.eta);
            for (auto& m : res.local_models) m = avg;
            round_tracker.reset();
            res.averaging_episodes.push_back(j);
            log.averaged = true;
        }
        if (std::find(cfg.checkpoint_episodes.begin(), cfg.checkpoint_episodes.end(), j) != cfg.checkpoint_episodes.end())
            res.checkpoints[j] = res.local_models;
        if (on_episode) on_episode(log);
        res.log.push_back(std::move(log));
    }
    return res;
}

}  // namespace fed
}  // namespace mfrl
