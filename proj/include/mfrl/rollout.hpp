#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "mfrl/env.hpp"
#include "mfrl/net.hpp"
#include "mfrl/ppo.hpp"

namespace mfrl {

/// Independent RNG stream `stream` of a run seeded with `seed`.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x6d66726cu};
    return Rng(seq);
}

struct EpisodeResult {
    std::vector<RolloutBuffer> per_ue;
    double total_reward = 0.0;
    double mean_entropy_channel = 0.0;
    double mean_entropy_power = 0.0;
    double mean_sum_ee = 0.0;
    int collision_steps = 0;
    int steps = 0;
    std::vector<long> successes;

    [[nodiscard]] double collision_rate() const { return steps ? static_cast<double>(collision_steps) / steps : 0.0; }
};

/// Runs one episode with UE i acting under `policies[i]`; transitions carry
/// rollout-time log-probabilities and value estimates.
inline EpisodeResult run_episode(Environment& env, std::span<const PolicyParams* const> policies, Rng& env_rng,
                                 Rng& policy_rng) {
    const int n_ues = env.n_ues();
    if (static_cast<int>(policies.size()) != n_ues) throw std::invalid_argument("run_episode: one policy per UE");
    const int length = env.config().episode_length;
    EpisodeResult res;
    res.per_ue.resize(static_cast<std::size_t>(n_ues));
    res.successes.assign(static_cast<std::size_t>(n_ues), 0);
    std::vector<Observation> obs = env.observe();
    std::vector<net::ForwardOutput> outs(static_cast<std::size_t>(n_ues));
    for (int i = 0; i < n_ues; ++i)
        outs[static_cast<std::size_t>(i)] = net::forward(*policies[static_cast<std::size_t>(i)], obs[static_cast<std::size_t>(i)]);

    std::vector<Action> actions(static_cast<std::size_t>(n_ues));
    std::vector<net::SampledAction> sampled(static_cast<std::size_t>(n_ues));
    for (int step = 0; step < length; ++step) {
        for (int i = 0; i < n_ues; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            sampled[ui] = net::sample_action(outs[ui], env.scenario(), policy_rng);
            actions[ui] = sampled[ui].action;
            res.mean_entropy_channel += sampled[ui].entropy_channel;
            res.mean_entropy_power += sampled[ui].entropy_power;
        }
        StepResult sr = env.joint_step(actions, env_rng);
        res.total_reward += sr.reward;
        res.mean_sum_ee += sr.stats.sum_ee;
        res.collision_steps += sr.stats.collision ? 1 : 0;
        ++res.steps;
        for (int i = 0; i < n_ues; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            net::ForwardOutput next = net::forward(*policies[ui], sr.next_obs[ui]);
            Transition t;
            t.obs = std::move(obs[ui]);
            t.action = actions[ui];
            t.reward = sr.reward;
            t.next_obs = sr.next_obs[ui];
            t.log_prob_channel = sampled[ui].log_prob_channel;
            t.log_prob_power = sampled[ui].log_prob_power;
            t.value_estimate = outs[ui].value;
            t.next_value_estimate = next.value;
            t.done = step + 1 == length;
            res.per_ue[ui].push(std::move(t));
            if (sr.stats.success[ui]) ++res.successes[ui];
            outs[ui] = std::move(next);
        }
        obs = std::move(sr.next_obs);
    }
    const double denom = static_cast<double>(res.steps) * n_ues;
    res.mean_entropy_channel /= denom;
    res.mean_entropy_power /= denom;
    res.mean_sum_ee /= res.steps;
    return res;
}

}  // namespace mfrl
