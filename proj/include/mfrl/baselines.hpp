#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfrl/channel.hpp"
#include "mfrl/env.hpp"
#include "mfrl/fed.hpp"
#include "mfrl/net.hpp"

namespace mfrl {

enum class Variant { MFRL, MRL, FRL, MARL, MFRL_EARLY };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::MFRL: return "MFRL";
        case Variant::MRL: return "MRL";
        case Variant::FRL: return "FRL";
        case Variant::MARL: return "MARL";
        case Variant::MFRL_EARLY: return "MFRL_early";
    }
    return "unknown";
}

inline Variant parse_variant(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (s == "MFRL") return Variant::MFRL;
    if (s == "MRL") return Variant::MRL;
    if (s == "FRL") return Variant::FRL;
    if (s == "MARL") return Variant::MARL;
    if (s == "MFRL_EARLY") return Variant::MFRL_EARLY;
    throw ConfigError("unknown variant '" + s + "'");
}

inline bool uses_meta_init(Variant v) { return v == Variant::MFRL || v == Variant::MRL || v == Variant::MFRL_EARLY; }
inline bool uses_averaging(Variant v) { return v == Variant::MFRL || v == Variant::FRL || v == Variant::MFRL_EARLY; }

namespace baselines {

/// Maximum-weight assignment of rows to distinct columns (rows <= cols),
/// by the O(I^2 N) shortest-augmenting-path form of the Hungarian method on
/// the negated weights. Returns the column of every row.
inline std::vector<int> hungarian_assignment(const Matrix& weights) {
    const int n = weights.rows;
    const int m = weights.cols;
    if (n > m) throw std::invalid_argument("hungarian_assignment: more rows than columns");
    for (double w : weights.data)
        if (!std::isfinite(w)) throw std::invalid_argument("hungarian_assignment: non-finite entry");
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; column 0 is the virtual source
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<int> owner(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        owner[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = owner[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                const auto uj = static_cast<std::size_t>(j);
                if (used[uj]) continue;
                const double cur = -weights(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[uj];
                if (cur < minv[uj]) {
                    minv[uj] = cur;
                    way[uj] = j0;
                }
                if (minv[uj] < delta) {
                    delta = minv[uj];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                const auto uj = static_cast<std::size_t>(j);
                if (used[uj]) {
                    u[static_cast<std::size_t>(owner[uj])] += delta;
                    v[uj] -= delta;
                } else {
                    minv[uj] -= delta;
                }
            }
            j0 = j1;
        } while (owner[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            owner[static_cast<std::size_t>(j0)] = owner[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> assignment(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= m; ++j)
        if (owner[static_cast<std::size_t>(j)] != 0) assignment[static_cast<std::size_t>(owner[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return assignment;
}

inline double assignment_value(const Matrix& weights, const std::vector<int>& assignment) {
    double s = 0.0;
    for (int i = 0; i < weights.rows; ++i) s += weights(i, assignment[static_cast<std::size_t>(i)]);
    return s;
}

/// Oracle power grid: `points` values uniform in dBm over [p_min, p_max].
inline std::vector<double> power_grid_w(const ScenarioConfig& cfg, int points = 25) {
    std::vector<double> grid;
    for (int k = 0; k < points; ++k) {
        double dbm = points == 1 ? cfg.p_min_dbm
                                 : cfg.p_min_dbm + (cfg.p_max_dbm - cfg.p_min_dbm) * k / (points - 1);
        grid.push_back(channel::dbm_to_w(dbm));
    }
    return grid;
}

struct PairChoice {
    double ee = 0.0;
    double power_w = 0.0;
    bool feasible = false;
};

/// Best EE for UE i on subchannel n. Candidates are the grid plus the exact
/// SNR-threshold power; EE falls with power, so the smallest power that
/// clears gamma_min is optimal whenever one exists. A pair with no feasible
/// power is scored at the p_max fallback EE the reward also uses.
inline PairChoice best_pair(const ScenarioConfig& cfg, double gain, double bw_hz, double noise_w,
                            const std::vector<double>& grid) {
    const double gmin = cfg.gamma_min_lin();
    std::vector<double> candidates = grid;
    const double threshold = gmin * noise_w / gain;
    const double nudged = std::nextafter(threshold, std::numeric_limits<double>::infinity());
    if (nudged >= cfg.p_min_w() && nudged <= cfg.p_max_w()) candidates.push_back(nudged);
    PairChoice best;
    for (double p : candidates) {
        const double gamma = channel::snr(true, gain, p, noise_w);
        if (!(gamma > gmin)) continue;
        const double ee = channel::energy_efficiency(bw_hz, p, gamma, true);
        if (!best.feasible || ee > best.ee) best = {ee, p, true};
    }
    if (!best.feasible) {
        const double p = cfg.p_max_w();
        best = {channel::energy_efficiency(bw_hz, p, channel::snr(true, gain, p, noise_w), true), p, false};
    }
    return best;
}

inline Matrix pair_ee_matrix(const ScenarioConfig& cfg, const Matrix& gains, const std::vector<double>& grid,
                             Matrix* powers = nullptr) {
    const auto noise = channel::noise_powers_w(cfg);
    Matrix ee(gains.rows, gains.cols);
    if (powers) *powers = Matrix(gains.rows, gains.cols);
    for (int i = 0; i < gains.rows; ++i)
        for (int n = 0; n < gains.cols; ++n) {
            const auto un = static_cast<std::size_t>(n);
            PairChoice c = best_pair(cfg, gains(i, n), cfg.subchannel_bandwidth_hz[un], noise[un], grid);
            ee(i, n) = c.ee;
            if (powers) (*powers)(i, n) = c.power_w;
        }
    return ee;
}

struct OracleResult {
    std::vector<int> assignment;
    std::vector<double> powers_w;
    double sum_ee = 0.0;
};

/// Exhaustive optimum of the joint subchannel/power problem on a frozen gain
/// matrix. Without inter-UE interference the power choice separates per
/// UE, so powers are optimised per pair and assignments enumerated.
inline OracleResult brute_force_optimum(const Matrix& gains, const std::vector<double>& power_grid,
                                        const ScenarioConfig& cfg) {
    const int n_ues = gains.rows;
    const int n_sub = gains.cols;
    if (n_sub != cfg.n_subchannels()) throw std::invalid_argument("brute_force_optimum: gain matrix width");
    if (n_ues > n_sub || n_sub > 6 || power_grid.size() > 32 || power_grid.empty())
        throw std::invalid_argument("brute_force_optimum: instance too large (need I <= N <= 6, grid <= 32)");
    Matrix powers;
    const Matrix ee = pair_ee_matrix(cfg, gains, power_grid, &powers);

    OracleResult best;
    best.sum_ee = -1.0;
    std::vector<int> current(static_cast<std::size_t>(n_ues), -1);
    std::vector<char> taken(static_cast<std::size_t>(n_sub), 0);
    auto search = [&](auto&& self, int i, double acc) -> void {
        if (i == n_ues) {
            if (acc > best.sum_ee) {
                best.sum_ee = acc;
                best.assignment = current;
            }
            return;
        }
        for (int n = 0; n < n_sub; ++n) {
            if (taken[static_cast<std::size_t>(n)]) continue;
            taken[static_cast<std::size_t>(n)] = 1;
            current[static_cast<std::size_t>(i)] = n;
            self(self, i + 1, acc + ee(i, n));
            taken[static_cast<std::size_t>(n)] = 0;
        }
    };
    search(search, 0, 0.0);
    for (int i = 0; i < n_ues; ++i) best.powers_w.push_back(powers(i, best.assignment[static_cast<std::size_t>(i)]));
    return best;
}

/// Same optimum through the Hungarian method on the per-pair EE matrix; no
/// size guard.
inline OracleResult hungarian_optimum(const Matrix& gains, const std::vector<double>& power_grid,
                                      const ScenarioConfig& cfg) {
    Matrix powers;
    const Matrix ee = pair_ee_matrix(cfg, gains, power_grid, &powers);
    OracleResult r;
    r.assignment = hungarian_assignment(ee);
    r.sum_ee = assignment_value(ee, r.assignment);
    for (int i = 0; i < gains.rows; ++i) r.powers_w.push_back(powers(i, r.assignment[static_cast<std::size_t>(i)]));
    return r;
}

struct VariantRun {
    Variant variant;
    fed::AdaptResult adapt;
    /// Models to evaluate: the final local models, or the mid-run
    /// checkpoint for MFRL_early.
    std::vector<PolicyParams> eval_models;
};

/// Wires initialisation and averaging for one benchmark.
inline VariantRun run_variant(Variant variant, const TaskSpec& task, FedConfig cfg,
                              const std::optional<PolicyParams>& meta_model, const Topology& topology,
                              std::uint64_t seed, const fed::EpisodeCallback& on_episode = {}) {
    PolicyParams init;
    if (uses_meta_init(variant)) {
        if (!meta_model) throw ConfigError(to_string(variant) + " needs a pre-trained meta model");
        init = *meta_model;
    } else {
        Rng init_rng = make_stream(seed, 7);
        init = net::init_params(topology, init_rng);
    }
    if (!uses_averaging(variant)) cfg.weighting = Weighting::None;
    else if (cfg.weighting == Weighting::None) cfg.weighting = Weighting::SuccessWeighted;
    const int early = std::max(1, cfg.n_episodes / 2);
    if (variant == Variant::MFRL_EARLY && std::find(cfg.checkpoint_episodes.begin(), cfg.checkpoint_episodes.end(),
                                                     early) == cfg.checkpoint_episodes.end())
        cfg.checkpoint_episodes.push_back(early);
    VariantRun run{variant, fed::adapt(init, task, cfg, seed, on_episode), {}};
    if (variant == Variant::MFRL_EARLY) {
        auto it = run.adapt.checkpoints.find(early);
        if (it == run.adapt.checkpoints.end()) throw std::logic_error("MFRL_early checkpoint missing");
        run.eval_models = it->second;
    } else {
        run.eval_models = run.adapt.local_models;
    }
    return run;
}

}  // namespace baselines
}  // namespace mfrl
