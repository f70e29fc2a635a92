#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfrl/channel.hpp"
#include "mfrl/config.hpp"

namespace mfrl {

/// One resource-allocation task: a scenario and a UE count.
struct TaskSpec {
    int n_ues = 2;
    ScenarioConfig scenario;
    std::uint64_t seed = 0;
};

struct EnvConfig {
    /// Scales bits/J into reward units.
    double reward_coeff = 1e-7;
    int episode_length = 100;
    /// Gains enter the observation as log10(h)/10 + gain_log_shift.
    double gain_log_shift = 1.0;
};

struct Observation {
    std::vector<double> features;
};

struct Action {
    int channel = 0;
    double power_raw = 0.0;
    double power_w = 0.0;
};

struct Transition {
    Observation obs;
    Action action;
    double reward = 0.0;
    Observation next_obs;
    double log_prob_channel = 0.0;
    double log_prob_power = 0.0;
    double value_estimate = 0.0;
    double next_value_estimate = 0.0;
    bool done = false;
    int task_id = 0;
};

/// Per-UE collision-free assignment counts.
struct SuccessTracker {
    std::vector<long> beta;
    long total = 0;

    explicit SuccessTracker(int n_ues = 0) : beta(static_cast<std::size_t>(n_ues), 0) {}

    void reset() {
        std::fill(beta.begin(), beta.end(), 0);
        total = 0;
    }
};

inline double success_rate(const SuccessTracker& tracker, int ue) {
    if (tracker.total == 0) return 0.0;
    return static_cast<double>(tracker.beta.at(static_cast<std::size_t>(ue))) / static_cast<double>(tracker.total);
}

inline double discounted_return(std::span<const double> rewards, double xi) {
    if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("discounted_return: discount must lie in (0, 1)");
    double ret = 0.0;
    double w = 1.0;
    for (double r : rewards) {
        ret += w * r;
        w *= xi;
    }
    return ret;
}

/// Affine map from a Gaussian sample to transmit power: clip to [-1, 1], then
/// linear in dBm over [p_min, p_max].
inline double map_power_w(const ScenarioConfig& cfg, double raw) {
    double c = std::clamp(raw, -1.0, 1.0);
    double dbm = cfg.p_min_dbm + (c + 1.0) * 0.5 * (cfg.p_max_dbm - cfg.p_min_dbm);
    return channel::dbm_to_w(dbm);
}

/// UE i succeeds when no other UE picked its subchannel.
inline std::vector<bool> collision_free_mask(std::span<const int> channels, int n_subchannels) {
    std::vector<int> count(static_cast<std::size_t>(n_subchannels), 0);
    for (int c : channels) {
        if (c < 0 || c >= n_subchannels) throw std::out_of_range("subchannel index out of range");
        ++count[static_cast<std::size_t>(c)];
    }
    std::vector<bool> ok;
    ok.reserve(channels.size());
    for (int c : channels) ok.push_back(count[static_cast<std::size_t>(c)] == 1);
    return ok;
}

/// Shared team reward: sum of per-UE rewards when the assignment is
/// collision-free, otherwise (I_suc - I) / I.
inline double global_reward(std::span<const double> ue_rewards, const std::vector<bool>& success) {
    const int n = static_cast<int>(success.size());
    int n_suc = 0;
    for (bool s : success) n_suc += s ? 1 : 0;
    if (n_suc == n) {
        double sum = 0.0;
        for (double r : ue_rewards) sum += r;
        return sum;
    }
    return static_cast<double>(n_suc - n) / static_cast<double>(n);
}

/// EE credited to a collision-free UE: the chosen power if the SNR clears
/// gamma_min, otherwise the EE it would get at p_max.
inline double credited_ee(const ScenarioConfig& cfg, double bw_hz, double gain, double noise_w, double p_w) {
    double gamma = channel::snr(true, gain, p_w, noise_w);
    if (gamma > cfg.gamma_min_lin()) return channel::energy_efficiency(bw_hz, p_w, gamma, true);
    double p_max = cfg.p_max_w();
    return channel::energy_efficiency(bw_hz, p_max, channel::snr(true, gain, p_max, noise_w), true);
}

struct StepStats {
    std::vector<double> ee_per_ue;
    std::vector<bool> success;
    int n_success = 0;
    bool collision = false;
    double sum_ee = 0.0;
};

struct StepResult {
    double reward = 0.0;
    std::vector<Observation> next_obs;
    StepStats stats;
};

/// Single-cell multi-UE uplink environment with a shared team reward.
class Environment {
public:
    Environment(ScenarioConfig scenario, EnvConfig config = {})
        : cfg_(std::move(scenario)), env_cfg_(config), noise_w_(channel::noise_powers_w(cfg_)) {
        cfg_.validate();
        if (env_cfg_.episode_length < 1) throw ConfigError("episode_length must be >= 1");
    }

    std::vector<Observation> reset(int n_ues, Rng& rng) {
        if (n_ues < 1) throw ConfigError("need at least one UE");
        if (n_ues > cfg_.n_subchannels())
            throw ConfigError("n_ues (" + std::to_string(n_ues) + ") exceeds the number of subchannels (" +
                              std::to_string(cfg_.n_subchannels()) + ")");
        ues_ = channel::place_ues(cfg_, n_ues, rng);
        state_ = channel::make_channel(cfg_, ues_, rng);
        tracker_ = SuccessTracker(n_ues);
        step_in_episode_ = 0;
        return observe();
    }

    /// Applies one action per UE, scores it on the current gains, then
    /// advances the channel by one step.
    StepResult joint_step(std::span<const Action> actions, Rng& rng) {
        const int n_ues = state_.n_ues();
        if (static_cast<int>(actions.size()) != n_ues) throw std::invalid_argument("joint_step: one action per UE");
        std::vector<int> channels;
        channels.reserve(actions.size());
        for (const auto& a : actions) channels.push_back(a.channel);

        StepResult out;
        out.stats.success = collision_free_mask(channels, cfg_.n_subchannels());
        out.stats.ee_per_ue.assign(static_cast<std::size_t>(n_ues), 0.0);
        std::vector<double> ue_rewards(static_cast<std::size_t>(n_ues), 0.0);
        for (int i = 0; i < n_ues; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            if (!out.stats.success[ui]) continue;
            const int n = channels[ui];
            const auto un = static_cast<std::size_t>(n);
            double ee = credited_ee(cfg_, cfg_.subchannel_bandwidth_hz[un], state_.gain_lin(i, n), noise_w_[un],
                                    actions[ui].power_w);
            out.stats.ee_per_ue[ui] = ee;
            ue_rewards[ui] = env_cfg_.reward_coeff * ee;
            out.stats.sum_ee += ee;
            ++out.stats.n_success;
            ++tracker_.beta[ui];
        }
        ++tracker_.total;
        out.stats.collision = out.stats.n_success != n_ues;
        out.reward = global_reward(ue_rewards, out.stats.success);

        channel::advance(cfg_, state_, ues_, rng);
        step_in_episode_ = (step_in_episode_ + 1) % env_cfg_.episode_length;
        out.next_obs = observe();
        return out;
    }

    [[nodiscard]] std::vector<Observation> observe() const {
        std::vector<Observation> obs(static_cast<std::size_t>(state_.n_ues()));
        for (int i = 0; i < state_.n_ues(); ++i) obs[static_cast<std::size_t>(i)] = observe_ue(i);
        return obs;
    }

    [[nodiscard]] Observation observe_ue(int i) const {
        const int n_sub = cfg_.n_subchannels();
        Observation o;
        o.features.reserve(static_cast<std::size_t>(n_sub) + 2);
        for (int n = 0; n < n_sub; ++n)
            o.features.push_back(std::log10(state_.gain_lin(i, n)) / 10.0 + env_cfg_.gain_log_shift);
        o.features.push_back(static_cast<double>(state_.n_ues()) / static_cast<double>(n_sub));
        o.features.push_back(static_cast<double>(step_in_episode_) / static_cast<double>(env_cfg_.episode_length));
        return o;
    }

    [[nodiscard]] int observation_dim() const { return cfg_.n_subchannels() + 2; }
    [[nodiscard]] int n_ues() const { return state_.n_ues(); }
    [[nodiscard]] int step_in_episode() const { return step_in_episode_; }
    [[nodiscard]] const ScenarioConfig& scenario() const { return cfg_; }
    [[nodiscard]] const EnvConfig& config() const { return env_cfg_; }
    [[nodiscard]] const channel::ChannelState& channel_state() const { return state_; }
    [[nodiscard]] const std::vector<channel::UEState>& ues() const { return ues_; }
    [[nodiscard]] const SuccessTracker& tracker() const { return tracker_; }
    [[nodiscard]] const std::vector<double>& noise_w() const { return noise_w_; }
    SuccessTracker& tracker() { return tracker_; }

    /// Test hook: overwrite the gain matrix (and its decomposition) in place.
    void set_gains_for_test(const Matrix& gains) {
        state_.gain_lin = gains;
        state_.fading_power_lin = Matrix(gains.rows, gains.cols, 1.0);
        state_.shadowing_lin = Matrix(gains.rows, gains.cols, 1.0);
        state_.pathloss_db = Matrix(gains.rows, gains.cols);
        for (std::size_t k = 0; k < gains.data.size(); ++k) state_.pathloss_db.data[k] = -10.0 * std::log10(gains.data[k]);
    }

private:
    ScenarioConfig cfg_;
    EnvConfig env_cfg_;
    std::vector<double> noise_w_;
    std::vector<channel::UEState> ues_;
    channel::ChannelState state_;
    SuccessTracker tracker_;
    int step_in_episode_ = 0;
};

}  // namespace mfrl
