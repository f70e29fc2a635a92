#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace mfrl {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScenarioKind { IndoorOffice, UrbanMicro, UrbanMacro, RuralMacro };

inline std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::IndoorOffice: return "indoor";
        case ScenarioKind::UrbanMicro: return "urban_micro";
        case ScenarioKind::UrbanMacro: return "urban_macro";
        case ScenarioKind::RuralMacro: return "rural_macro";
    }
    return "unknown";
}

inline ScenarioKind parse_scenario_kind(const std::string& name) {
    if (name == "indoor" || name == "indoor_office") return ScenarioKind::IndoorOffice;
    if (name == "urban_micro" || name == "umi") return ScenarioKind::UrbanMicro;
    if (name == "urban_macro" || name == "uma") return ScenarioKind::UrbanMacro;
    if (name == "rural_macro" || name == "rma") return ScenarioKind::RuralMacro;
    throw ConfigError("unknown scenario '" + name + "'");
}

/// Physical constants of one single-cell deployment.
///
/// Bandwidths are in Hz, one entry per subchannel. Every subchannel is a
/// resource block of `subcarriers_per_rb` subcarriers.
struct ScenarioConfig {
    ScenarioKind scenario_kind = ScenarioKind::UrbanMicro;
    double area_side_m = 100.0;
    double bs_height_m = 10.0;
    double ue_height_m = 1.5;
    double bs_antenna_gain_db = 8.0;
    double ue_antenna_gain_db = 3.0;
    double bs_noise_figure_db = 5.0;
    double ue_noise_figure_db = 9.0;
    int subcarriers_per_rb = 12;
    std::vector<double> subchannel_bandwidth_hz;
    std::vector<double> carrier_freq_ghz;
    double noise_psd_dbm_hz = -170.0;
    double p_max_dbm = 24.0;
    double p_min_dbm = 0.0;
    double gamma_min_db = 5.0;
    double shadowing_sigma_db = 7.8;
    bool shadowing_per_subchannel = true;
    int large_scale_update_period_steps = 100;
    int fast_fading_update_period_steps = 1;
    double ue_max_speed_mps = 1.0;
    double step_duration_s = 1e-3;

    [[nodiscard]] int n_subchannels() const { return static_cast<int>(subchannel_bandwidth_hz.size()); }
    [[nodiscard]] double p_max_w() const { return std::pow(10.0, (p_max_dbm - 30.0) / 10.0); }
    [[nodiscard]] double p_min_w() const { return std::pow(10.0, (p_min_dbm - 30.0) / 10.0); }
    [[nodiscard]] double gamma_min_lin() const { return std::pow(10.0, gamma_min_db / 10.0); }

    void validate() const {
        if (subchannel_bandwidth_hz.empty()) throw ConfigError("scenario needs at least one subchannel");
        if (carrier_freq_ghz.size() != subchannel_bandwidth_hz.size())
            throw ConfigError("carrier_freq_ghz and subchannel_bandwidth_hz lengths differ");
        for (double bw : subchannel_bandwidth_hz)
            if (!(bw > 0.0)) throw ConfigError("subchannel bandwidths must be positive");
        for (double f : carrier_freq_ghz)
            if (!(f > 0.0)) throw ConfigError("carrier frequencies must be positive");
        if (!(p_min_dbm < p_max_dbm)) throw ConfigError("p_min_dbm must be below p_max_dbm");
        if (!std::isfinite(gamma_min_db)) throw ConfigError("gamma_min_db must be finite");
        if (!(area_side_m > 0.0)) throw ConfigError("area_side_m must be positive");
        if (!(shadowing_sigma_db >= 0.0)) throw ConfigError("shadowing_sigma_db must be non-negative");
        if (large_scale_update_period_steps < 1 || fast_fading_update_period_steps < 1)
            throw ConfigError("update periods must be >= 1 step");
        if (ue_max_speed_mps < 0.0 || ue_max_speed_mps > 1.0)
            throw ConfigError("ue_max_speed_mps must lie in [0, 1]");
    }
};

/// Subchannel bandwidths used throughout the evaluation: 12-subcarrier RBs at
/// 15/30/60/120 kHz spacing.
inline std::vector<double> default_bandwidths_hz() {
    return {0.18e6, 0.18e6, 0.36e6, 0.36e6, 0.36e6, 0.72e6, 0.72e6, 0.72e6, 1.44e6, 1.44e6};
}

inline ScenarioConfig make_scenario(ScenarioKind kind) {
    ScenarioConfig cfg;
    cfg.scenario_kind = kind;
    cfg.subchannel_bandwidth_hz = default_bandwidths_hz();
    cfg.carrier_freq_ghz.assign(cfg.subchannel_bandwidth_hz.size(), 6.0);
    switch (kind) {
        case ScenarioKind::IndoorOffice:
            cfg.area_side_m = 20.0;
            cfg.bs_height_m = 3.0;
            cfg.noise_psd_dbm_hz = -160.0;
            break;
        case ScenarioKind::UrbanMicro:
            cfg.area_side_m = 100.0;
            cfg.bs_height_m = 10.0;
            cfg.noise_psd_dbm_hz = -170.0;
            break;
        case ScenarioKind::UrbanMacro:
            cfg.area_side_m = 500.0;
            cfg.bs_height_m = 25.0;
            cfg.noise_psd_dbm_hz = -180.0;
            break;
        case ScenarioKind::RuralMacro:
            cfg.area_side_m = 1000.0;
            cfg.bs_height_m = 35.0;
            cfg.noise_psd_dbm_hz = -185.0;
            break;
    }
    return cfg;
}

/// Restricts a scenario to the given bandwidth list (all carriers at the
/// scenario's first carrier frequency).
inline ScenarioConfig with_bandwidths(ScenarioConfig cfg, std::vector<double> bandwidths_hz) {
    double f = cfg.carrier_freq_ghz.empty() ? 6.0 : cfg.carrier_freq_ghz.front();
    cfg.subchannel_bandwidth_hz = std::move(bandwidths_hz);
    cfg.carrier_freq_ghz.assign(cfg.subchannel_bandwidth_hz.size(), f);
    return cfg;
}

/// Flat `key = value` configuration with `[section]` headers, read through
/// Boost.PropertyTree's INI reader. Keys are addressed as `section.key`.
/// Every key must be consumed by the caller; `check_all_used` reports the
/// first unknown one.
class IniConfig {
public:
    IniConfig() = default;

    static IniConfig load(const std::string& path) {
        IniConfig cfg;
        try {
            boost::property_tree::ini_parser::read_ini(path, cfg.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(std::string("cannot read config: ") + e.what());
        }
        return cfg;
    }

    static IniConfig parse(const std::string& text) {
        IniConfig cfg;
        std::istringstream in(text);
        try {
            boost::property_tree::ini_parser::read_ini(in, cfg.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(std::string("cannot parse config: ") + e.what());
        }
        return cfg;
    }

    [[nodiscard]] bool has(const std::string& key) const { return tree_.get_child_optional(path(key)).has_value(); }

    template <typename T>
    T get(const std::string& key, T fallback) const {
        used_[key] = true;
        auto node = tree_.get_optional<std::string>(path(key));
        if (!node) return fallback;
        try {
            return convert<T>(*node);
        } catch (const std::exception&) {
            throw ConfigError("invalid value for config key '" + key + "': " + *node);
        }
    }

    std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
        used_[key] = true;
        auto node = tree_.get_optional<std::string>(path(key));
        if (!node) return fallback;
        std::vector<double> out;
        std::string item;
        std::istringstream in(*node);
        while (std::getline(in, item, ',')) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError("invalid list entry for config key '" + key + "': " + item);
            }
        }
        return out;
    }

    void check_all_used() const {
        for (const auto& [section, body] : tree_) {
            if (body.empty()) {
                if (!used_.count(section)) throw ConfigError("unknown config key '" + section + "'");
                continue;
            }
            for (const auto& [key, unused] : body) {
                std::string full = section + "." + key;
                if (!used_.count(full)) throw ConfigError("unknown config key '" + full + "'");
            }
        }
    }

private:
    static boost::property_tree::ptree::path_type path(const std::string& key) {
        return boost::property_tree::ptree::path_type(key, '.');
    }

    template <typename T>
    static T convert(const std::string& raw) {
        if constexpr (std::is_same_v<T, std::string>) {
            return raw;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (raw == "true" || raw == "1" || raw == "yes") return true;
            if (raw == "false" || raw == "0" || raw == "no") return false;
            throw std::invalid_argument(raw);
        } else if constexpr (std::is_integral_v<T>) {
            std::size_t pos = 0;
            long long v = std::stoll(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
            return static_cast<T>(v);
        } else {
            std::size_t pos = 0;
            double v = std::stod(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
            return static_cast<T>(v);
        }
    }

    boost::property_tree::ptree tree_;
    mutable std::map<std::string, bool> used_;
};

/// Reads a `[scenario]` section on top of the preset named by `scenario.kind`.
inline ScenarioConfig load_scenario(const IniConfig& ini, const std::string& section,
                                    ScenarioKind default_kind) {
    auto key = [&](const char* name) { return section + "." + name; };
    ScenarioKind kind = default_kind;
    if (ini.has(key("kind"))) kind = parse_scenario_kind(ini.get<std::string>(key("kind"), ""));
    else ini.get<std::string>(key("kind"), "");
    ScenarioConfig cfg = make_scenario(kind);
    cfg.area_side_m = ini.get(key("area_side_m"), cfg.area_side_m);
    cfg.bs_height_m = ini.get(key("bs_height_m"), cfg.bs_height_m);
    cfg.ue_height_m = ini.get(key("ue_height_m"), cfg.ue_height_m);
    cfg.bs_antenna_gain_db = ini.get(key("bs_antenna_gain_db"), cfg.bs_antenna_gain_db);
    cfg.ue_antenna_gain_db = ini.get(key("ue_antenna_gain_db"), cfg.ue_antenna_gain_db);
    cfg.bs_noise_figure_db = ini.get(key("bs_noise_figure_db"), cfg.bs_noise_figure_db);
    cfg.ue_noise_figure_db = ini.get(key("ue_noise_figure_db"), cfg.ue_noise_figure_db);
    cfg.noise_psd_dbm_hz = ini.get(key("noise_psd_dbm_hz"), cfg.noise_psd_dbm_hz);
    cfg.p_max_dbm = ini.get(key("p_max_dbm"), cfg.p_max_dbm);
    cfg.p_min_dbm = ini.get(key("p_min_dbm"), cfg.p_min_dbm);
    cfg.gamma_min_db = ini.get(key("gamma_min_db"), cfg.gamma_min_db);
    cfg.shadowing_sigma_db = ini.get(key("shadowing_sigma_db"), cfg.shadowing_sigma_db);
    cfg.shadowing_per_subchannel = ini.get(key("shadowing_per_subchannel"), cfg.shadowing_per_subchannel);
    cfg.large_scale_update_period_steps =
        ini.get(key("large_scale_update_period_steps"), cfg.large_scale_update_period_steps);
    cfg.fast_fading_update_period_steps =
        ini.get(key("fast_fading_update_period_steps"), cfg.fast_fading_update_period_steps);
    cfg.ue_max_speed_mps = ini.get(key("ue_max_speed_mps"), cfg.ue_max_speed_mps);
    auto mhz = ini.get_list(key("bandwidths_mhz"), {});
    if (!mhz.empty()) {
        for (double& v : mhz) v *= 1e6;
        cfg = with_bandwidths(cfg, mhz);
    }
    auto freqs = ini.get_list(key("carrier_freq_ghz"), {});
    if (!freqs.empty()) cfg.carrier_freq_ghz = freqs;
    cfg.validate();
    return cfg;
}

}  // namespace mfrl
