#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mfrl/baselines.hpp"
#include "mfrl/config.hpp"
#include "mfrl/fed.hpp"
#include "mfrl/meta.hpp"
#include "mfrl/net.hpp"

namespace mfrl {

/// Everything one experiment needs, read from a single INI file.
struct ExperimentConfig {
    ScenarioConfig meta_scenario = make_scenario(ScenarioKind::UrbanMicro);
    ScenarioConfig adapt_scenario = make_scenario(ScenarioKind::IndoorOffice);
    std::vector<int> meta_tasks{2, 4, 8};
    int n_ues = 6;
    int hidden1 = 512;
    int hidden2 = 256;
    int critic_hidden = 128;
    MetaConfig meta;
    FedConfig fed;
    int eval_distributions = 10;
    int eval_steps = 100;
    int oracle_grid_points = 25;
    bool eval_stochastic = false;
    unsigned workers = 1;

    [[nodiscard]] Topology topology() const {
        const int n = adapt_scenario.n_subchannels();
        return {n + 2, hidden1, hidden2, n, critic_hidden};
    }
};

inline PpoConfig load_ppo(const IniConfig& ini) {
    PpoConfig p;
    p.xi = ini.get("ppo.xi", p.xi);
    p.lambda = ini.get("ppo.lambda", p.lambda);
    p.epsilon = ini.get("ppo.epsilon", p.epsilon);
    p.c1 = ini.get("ppo.c1", p.c1);
    p.c2 = ini.get("ppo.c2", p.c2);
    p.epochs = ini.get("ppo.epochs", p.epochs);
    p.minibatch_size = ini.get("ppo.minibatch_size", p.minibatch_size);
    p.normalize_advantages = ini.get("ppo.normalize_advantages", p.normalize_advantages);
    p.critic_discount_next = ini.get("ppo.critic_discount_next", p.critic_discount_next);
    p.validate();
    return p;
}

inline ExperimentConfig load_experiment(const IniConfig& ini) {
    ExperimentConfig c;
    c.meta_scenario = load_scenario(ini, "meta_scenario", ScenarioKind::UrbanMicro);
    c.adapt_scenario = load_scenario(ini, "scenario", ScenarioKind::IndoorOffice);
    EnvConfig env;
    env.reward_coeff = ini.get("env.reward_coeff", env.reward_coeff);
    env.episode_length = ini.get("env.episode_length", env.episode_length);
    env.gain_log_shift = ini.get("env.gain_log_shift", env.gain_log_shift);
    const PpoConfig ppo = load_ppo(ini);

    c.hidden1 = ini.get("network.hidden1", c.hidden1);
    c.hidden2 = ini.get("network.hidden2", c.hidden2);
    c.critic_hidden = ini.get("network.critic_hidden", c.critic_hidden);

    std::vector<double> tasks = ini.get_list("meta.tasks", {2, 4, 8});
    c.meta_tasks.assign(tasks.begin(), tasks.end());
    c.meta.n_epochs = ini.get("meta.epochs", c.meta.n_epochs);
    c.meta.meta_lr = ini.get("meta.lr", c.meta.meta_lr);
    c.meta.batch_size = ini.get("meta.batch_size", c.meta.batch_size);
    c.meta.ppo = ppo;
    c.meta.env = env;

    c.n_ues = ini.get("adapt.n_ues", c.n_ues);
    c.fed.n_episodes = ini.get("adapt.episodes", c.fed.n_episodes);
    c.fed.adaptation_lr = ini.get("adapt.lr", c.fed.adaptation_lr);
    c.fed.averaging_period = ini.get("adapt.averaging_period", c.fed.averaging_period);
    c.fed.weighting = parse_weighting(ini.get<std::string>("adapt.weighting", "success"));
    std::vector<double> ckpt = ini.get_list("adapt.checkpoints", {});
    c.fed.checkpoint_episodes.assign(ckpt.begin(), ckpt.end());
    if (ckpt.empty()) c.fed.checkpoint_episodes = {std::max(1, c.fed.n_episodes / 2)};
    c.fed.ppo = ppo;
    c.fed.env = env;

    c.eval_distributions = ini.get("eval.distributions", c.eval_distributions);
    c.eval_steps = ini.get("eval.steps", c.eval_steps);
    c.oracle_grid_points = ini.get("eval.grid_points", c.oracle_grid_points);
    c.eval_stochastic = ini.get("eval.stochastic", c.eval_stochastic);
    c.workers = ini.get("run.workers", c.workers);
    ini.check_all_used();

    if (c.meta_scenario.n_subchannels() != c.adapt_scenario.n_subchannels())
        throw ConfigError("meta_scenario and scenario must have the same number of subchannels");
    if (c.n_ues > c.adapt_scenario.n_subchannels()) throw ConfigError("adapt.n_ues exceeds the subchannel count");
    c.fed.validate();
    return c;
}

/// Runs fn(0) .. fn(n-1) on up to `workers` threads. Each index must write
/// only its own output slot.
template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < n; k = next++) fn(k);
        });
}

struct DistributionResult {
    int distribution = 0;
    double mean_sum_ee = 0.0;
    double oracle_sum_ee = std::numeric_limits<double>::quiet_NaN();
    double collision_rate = 0.0;
};

struct EvalOptions {
    int n_distributions = 10;
    int n_steps = 100;
    bool stochastic = false;
    bool with_oracle = true;
    int grid_points = 25;
};

/// Frozen-policy evaluation over random UE placements. At every step the
/// oracle solves the same frozen gains the policies act on.
inline std::vector<DistributionResult> evaluate_policies(const std::vector<PolicyParams>& models,
                                                         const ScenarioConfig& scenario, const EnvConfig& env_cfg,
                                                         const EvalOptions& opt, std::uint64_t seed) {
    const int n_ues = static_cast<int>(models.size());
    const auto grid = baselines::power_grid_w(scenario, opt.grid_points);
    std::vector<DistributionResult> rows;
    for (int d = 0; d < opt.n_distributions; ++d) {
        Environment env(scenario, env_cfg);
        Rng env_rng = make_stream(seed, 5000 + static_cast<std::uint64_t>(d));
        Rng act_rng = make_stream(seed, 9000 + static_cast<std::uint64_t>(d));
        env.reset(n_ues, env_rng);
        DistributionResult row;
        row.distribution = d;
        double ee = 0.0, oracle = 0.0;
        int collisions = 0;
        std::vector<Action> actions(static_cast<std::size_t>(n_ues));
        for (int s = 0; s < opt.n_steps; ++s) {
            auto obs = env.observe();
            for (int i = 0; i < n_ues; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                auto out = net::forward(models[ui], obs[ui]);
                actions[ui] = opt.stochastic ? net::sample_action(out, scenario, act_rng).action
                                             : net::greedy_action(out, scenario);
            }
            if (opt.with_oracle) {
                const auto& gains = env.channel_state().gain_lin;
                oracle += scenario.n_subchannels() <= 6 ? baselines::brute_force_optimum(gains, grid, scenario).sum_ee
                                                        : baselines::hungarian_optimum(gains, grid, scenario).sum_ee;
            }
            StepResult sr = env.joint_step(actions, env_rng);
            ee += sr.stats.sum_ee;
            collisions += sr.stats.collision ? 1 : 0;
        }
        row.mean_sum_ee = ee / opt.n_steps;
        if (opt.with_oracle) row.oracle_sum_ee = oracle / opt.n_steps;
        row.collision_rate = static_cast<double>(collisions) / opt.n_steps;
        rows.push_back(row);
    }
    return rows;
}

/// Mean oracle sum EE over random placements for a UE count.
inline std::vector<double> oracle_sweep(const ScenarioConfig& scenario, const EnvConfig& env_cfg, int n_ues,
                                        int n_distributions, int n_steps, int grid_points, std::uint64_t seed) {
    const auto grid = baselines::power_grid_w(scenario, grid_points);
    std::vector<double> out;
    for (int d = 0; d < n_distributions; ++d) {
        Environment env(scenario, env_cfg);
        Rng rng = make_stream(seed, 5000 + static_cast<std::uint64_t>(d));
        env.reset(n_ues, rng);
        double acc = 0.0;
        for (int s = 0; s < n_steps; ++s) {
            acc += baselines::hungarian_optimum(env.channel_state().gain_lin, grid, scenario).sum_ee;
            // advance the channel without acting: UEs pick distinct channels
            std::vector<Action> idle(static_cast<std::size_t>(n_ues));
            for (int i = 0; i < n_ues; ++i) idle[static_cast<std::size_t>(i)] = {i, -1.0, scenario.p_min_w()};
            env.joint_step(idle, rng);
        }
        out.push_back(acc / n_steps);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV output. Every file starts with a `# <schema> v<version>` line.

inline std::string fmt_num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& schema, const std::vector<std::string>& header)
        : out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        out_ << "# " << schema << "\n";
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
        out_ << "\n";
        out_.flush();
    }

private:
    std::ofstream out_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] int column(const std::string& name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return static_cast<int>(k);
        throw std::runtime_error("no CSV column '" + name + "'");
    }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
        } else {
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Minimal SVG charts, always rendered from a CSV file.

namespace plot {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

inline std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

inline void write_lines(const std::filesystem::path& svg, const std::string& title, const std::string& xlabel,
                        const std::string& ylabel, const std::vector<Series>& series) {
    const double w = 720, h = 420, ml = 70, mr = 150, mt = 40, mb = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (!std::isfinite(s.y[k])) continue;
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, s.y[k]);
            y1 = std::max(y1, s.y[k]);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb); };
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    std::ofstream o(svg);
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << esc(title) << "</text>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">" << esc(xlabel)
      << "</text>\n"
      << "<text x=\"16\" y=\"" << (mt + h - mb) / 2 << "\" transform=\"rotate(-90 16 " << (mt + h - mb) / 2
      << ")\" text-anchor=\"middle\">" << esc(ylabel) << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = y0 + (y1 - y0) * k / 4.0, xv = x0 + (x1 - x0) * k / 4.0;
        o << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
          << fmt_num(yv) << "</text>\n"
          << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 14 << "\" text-anchor=\"middle\" font-size=\"10\">"
          << fmt_num(xv) << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* c = colours[s % 6];
        o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < series[s].x.size(); ++k)
            if (std::isfinite(series[s].y[k])) o << px(series[s].x[k]) << "," << py(series[s].y[k]) << " ";
        o << "\"/>\n<text x=\"" << w - mr + 8 << "\" y=\"" << mt + 16 * (s + 1) << "\" fill=\"" << c
          << "\" font-size=\"12\">" << esc(series[s].name) << "</text>\n";
    }
    o << "</svg>\n";
}

inline void write_bars(const std::filesystem::path& svg, const std::string& title, const std::string& ylabel,
                       const std::vector<std::pair<std::string, double>>& bars) {
    const double w = 640, h = 400, ml = 80, mt = 40, mb = 50;
    double ymax = 0.0;
    for (const auto& b : bars) ymax = std::max(ymax, b.second);
    if (!(ymax > 0.0)) ymax = 1.0;
    std::ofstream o(svg);
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << esc(title) << "</text>\n"
      << "<text x=\"16\" y=\"" << h / 2 << "\" transform=\"rotate(-90 16 " << h / 2 << ")\" text-anchor=\"middle\">"
      << esc(ylabel) << "</text>\n";
    const double slot = (w - ml - 20) / std::max<std::size_t>(1, bars.size());
    for (std::size_t k = 0; k < bars.size(); ++k) {
        const double bh = bars[k].second / ymax * (h - mt - mb);
        const double x = ml + slot * k + slot * 0.15;
        o << "<rect x=\"" << x << "\" y=\"" << h - mb - bh << "\" width=\"" << slot * 0.7 << "\" height=\"" << bh
          << "\" fill=\"#1f77b4\"/>\n"
          << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << h - mb + 16 << "\" text-anchor=\"middle\" font-size=\"12\">"
          << esc(bars[k].first) << "</text>\n"
          << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << h - mb - bh - 4
          << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt_num(bars[k].second) << "</text>\n";
    }
    o << "</svg>\n";
}

/// Line chart of `y_cols` against `x_col` of a CSV file.
inline void csv_lines(const std::filesystem::path& csv, const std::string& x_col, const std::vector<std::string>& y_cols,
                      const std::filesystem::path& svg, const std::string& title, const std::string& ylabel) {
    CsvTable t = read_csv(csv);
    const int xc = t.column(x_col);
    std::vector<Series> series;
    for (const auto& name : y_cols) {
        const int yc = t.column(name);
        Series s{name, {}, {}};
        for (const auto& r : t.rows) {
            s.x.push_back(std::stod(r[static_cast<std::size_t>(xc)]));
            s.y.push_back(std::stod(r[static_cast<std::size_t>(yc)]));
        }
        series.push_back(std::move(s));
    }
    write_lines(svg, title, x_col, ylabel, series);
}

/// Bar chart of the per-group mean of `value_col` grouped by `group_col`.
inline void csv_group_means(const std::filesystem::path& csv, const std::string& group_col, const std::string& value_col,
                            const std::filesystem::path& svg, const std::string& title) {
    CsvTable t = read_csv(csv);
    const int gc = t.column(group_col), vc = t.column(value_col);
    std::vector<std::pair<std::string, double>> bars;
    std::vector<int> counts;
    for (const auto& r : t.rows) {
        const std::string& g = r[static_cast<std::size_t>(gc)];
        auto it = std::find_if(bars.begin(), bars.end(), [&](const auto& b) { return b.first == g; });
        if (it == bars.end()) {
            bars.emplace_back(g, 0.0);
            counts.push_back(0);
            it = bars.end() - 1;
        }
        it->second += std::stod(r[static_cast<std::size_t>(vc)]);
        ++counts[static_cast<std::size_t>(it - bars.begin())];
    }
    for (std::size_t k = 0; k < bars.size(); ++k) bars[k].second /= counts[k];
    write_bars(svg, title, value_col, bars);
}

}  // namespace plot
}  // namespace mfrl
