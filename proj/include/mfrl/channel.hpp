#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "mfrl/config.hpp"

namespace mfrl {

using Rng = std::mt19937_64;

/// Row-major I x N matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    bool operator==(const Matrix&) const = default;
};

namespace channel {

/// NLOS urban pathloss in dB; frequency in GHz, 3-D distance in metres.
inline double pathloss_db(double f_ghz, double d_m) {
    if (!(f_ghz > 0.0)) throw std::invalid_argument("pathloss_db: carrier frequency must be positive");
    if (!(d_m >= 1.0)) throw std::invalid_argument("pathloss_db: distance below 1 m");
    return 32.4 + 20.0 * std::log10(f_ghz) + 30.0 * std::log10(d_m);
}

inline double channel_gain(double pl_db, double shadow_lin, double fading_lin) {
    return std::pow(10.0, -pl_db / 10.0) * shadow_lin * fading_lin;
}

inline double dbm_to_w(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double w_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

/// Thermal noise power in watts over `bw_hz` for a PSD in dBm/Hz plus the
/// receiver noise figure.
inline double noise_power_w(double bw_hz, double psd_dbm_hz, double noise_figure_db) {
    return bw_hz * std::pow(10.0, (psd_dbm_hz + noise_figure_db - 30.0) / 10.0);
}

inline double snr(bool assigned, double gain_lin, double p_w, double noise_w) {
    return assigned ? gain_lin * p_w / noise_w : 0.0;
}

/// Uplink energy efficiency in bits/J. Zero for an unsuccessful assignment.
inline double energy_efficiency(double bw_hz, double p_w, double gamma_lin, bool assigned) {
    if (!assigned) return 0.0;
    if (!(p_w > 0.0)) throw std::invalid_argument("energy_efficiency: zero transmit power on an assigned channel");
    return bw_hz / p_w * std::log2(1.0 + gamma_lin);
}

struct UEState {
    double x = 0.0;
    double y = 0.0;
    double z = 1.5;
    double speed = 0.0;
    double heading = 0.0;

    bool operator==(const UEState&) const = default;
};

/// Large-scale and small-scale decomposition of every (UE, subchannel) link.
///
/// `pathloss_db` holds the coupling loss: the pathloss minus both antenna
/// gains. `gain_lin` is always 10^(-pathloss_db/10) * shadowing * fading.
struct ChannelState {
    Matrix pathloss_db;
    Matrix shadowing_lin;
    Matrix fading_power_lin;
    Matrix gain_lin;
    long step_counter = 0;

    [[nodiscard]] int n_ues() const { return gain_lin.rows; }
    [[nodiscard]] int n_subchannels() const { return gain_lin.cols; }

    bool operator==(const ChannelState&) const = default;
};

inline double distance_3d(const ScenarioConfig& cfg, const UEState& ue) {
    double dz = cfg.bs_height_m - ue.z;
    return std::sqrt(ue.x * ue.x + ue.y * ue.y + dz * dz);
}

/// Uniform placement over the square centred on the BS.
inline std::vector<UEState> place_ues(const ScenarioConfig& cfg, int n_ues, Rng& rng) {
    std::uniform_real_distribution<double> pos(-cfg.area_side_m / 2.0, cfg.area_side_m / 2.0);
    std::uniform_real_distribution<double> speed(0.0, cfg.ue_max_speed_mps);
    std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
    std::vector<UEState> ues(static_cast<std::size_t>(n_ues));
    for (auto& ue : ues) {
        ue.x = pos(rng);
        ue.y = pos(rng);
        ue.z = cfg.ue_height_m;
        ue.speed = speed(rng);
        ue.heading = heading(rng);
    }
    return ues;
}

/// Moves each UE for `dt_s` seconds along its heading, reflecting at the
/// square's edges, then draws a fresh heading.
inline void move_ues(const ScenarioConfig& cfg, std::vector<UEState>& ues, double dt_s, Rng& rng) {
    std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
    const double half = cfg.area_side_m / 2.0;
    auto reflect = [half](double v) {
        // a UE moves at most 1 m/s, so one fold per call suffices for any
        // realistic period; loop anyway for long periods
        while (v > half || v < -half) v = v > half ? 2.0 * half - v : -2.0 * half - v;
        return v;
    };
    for (auto& ue : ues) {
        ue.x = reflect(ue.x + ue.speed * dt_s * std::cos(ue.heading));
        ue.y = reflect(ue.y + ue.speed * dt_s * std::sin(ue.heading));
        ue.heading = heading(rng);
    }
}

inline void refresh_gains(ChannelState& st) {
    for (std::size_t k = 0; k < st.gain_lin.data.size(); ++k)
        st.gain_lin.data[k] =
            channel_gain(st.pathloss_db.data[k], st.shadowing_lin.data[k], st.fading_power_lin.data[k]);
}

inline void recompute_pathloss(const ScenarioConfig& cfg, const std::vector<UEState>& ues, ChannelState& st) {
    const double antenna_db = cfg.bs_antenna_gain_db + cfg.ue_antenna_gain_db;
    for (int i = 0; i < st.pathloss_db.rows; ++i) {
        double d = std::max(1.0, distance_3d(cfg, ues[static_cast<std::size_t>(i)]));
        for (int n = 0; n < st.pathloss_db.cols; ++n)
            st.pathloss_db(i, n) = pathloss_db(cfg.carrier_freq_ghz[static_cast<std::size_t>(n)], d) - antenna_db;
    }
}

inline void draw_shadowing(const ScenarioConfig& cfg, ChannelState& st, Rng& rng) {
    std::normal_distribution<double> ln_shadow(0.0, cfg.shadowing_sigma_db * std::numbers::ln10 / 10.0);
    for (int i = 0; i < st.shadowing_lin.rows; ++i) {
        double shared = std::exp(ln_shadow(rng));
        for (int n = 0; n < st.shadowing_lin.cols; ++n)
            st.shadowing_lin(i, n) = cfg.shadowing_per_subchannel ? std::exp(ln_shadow(rng)) : shared;
    }
}

/// Rayleigh power fading: exponential with unit mean.
inline void draw_fading(ChannelState& st, Rng& rng) {
    std::exponential_distribution<double> power(1.0);
    for (double& m : st.fading_power_lin.data) {
        // keep strictly positive so every gain stays > 0
        do {
            m = power(rng);
        } while (!(m > 0.0));
    }
}

inline ChannelState make_channel(const ScenarioConfig& cfg, const std::vector<UEState>& ues, Rng& rng) {
    const int n_ues = static_cast<int>(ues.size());
    const int n_sub = cfg.n_subchannels();
    ChannelState st{Matrix(n_ues, n_sub), Matrix(n_ues, n_sub, 1.0), Matrix(n_ues, n_sub, 1.0),
                    Matrix(n_ues, n_sub), 0};
    recompute_pathloss(cfg, ues, st);
    draw_shadowing(cfg, st, rng);
    draw_fading(st, rng);
    refresh_gains(st);
    return st;
}

/// One millisecond step: fast fading every `fast_fading_update_period_steps`,
/// mobility + pathloss + shadowing every `large_scale_update_period_steps`.
inline void advance(const ScenarioConfig& cfg, ChannelState& st, std::vector<UEState>& ues, Rng& rng) {
    if (static_cast<int>(ues.size()) != st.n_ues())
        throw std::invalid_argument("advance: UE count does not match channel state");
    ++st.step_counter;
    if (st.step_counter % cfg.large_scale_update_period_steps == 0) {
        move_ues(cfg, ues, cfg.large_scale_update_period_steps * cfg.step_duration_s, rng);
        recompute_pathloss(cfg, ues, st);
        draw_shadowing(cfg, st, rng);
    }
    if (st.step_counter % cfg.fast_fading_update_period_steps == 0) draw_fading(st, rng);
    refresh_gains(st);
}

/// Per-subchannel noise power at the BS receiver.
inline std::vector<double> noise_powers_w(const ScenarioConfig& cfg) {
    std::vector<double> out;
    out.reserve(cfg.subchannel_bandwidth_hz.size());
    for (double bw : cfg.subchannel_bandwidth_hz)
        out.push_back(noise_power_w(bw, cfg.noise_psd_dbm_hz, cfg.bs_noise_figure_db));
    return out;
}

}  // namespace channel
}  // namespace mfrl
