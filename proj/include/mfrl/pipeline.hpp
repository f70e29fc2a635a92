#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfrl/baselines.hpp"
#include "mfrl/experiment.hpp"

namespace mfrl::pipeline {

namespace fs = std::filesystem;

inline std::vector<TaskSpec> meta_tasks(const ExperimentConfig& cfg, std::uint64_t seed) {
    std::vector<TaskSpec> tasks;
    for (std::size_t k = 0; k < cfg.meta_tasks.size(); ++k)
        tasks.push_back({cfg.meta_tasks[k], cfg.meta_scenario, seed * 1000 + 901 + k});
    return tasks;
}

inline TaskSpec adapt_task(const ExperimentConfig& cfg, std::uint64_t seed) {
    return {cfg.n_ues, cfg.adapt_scenario, 1000 + seed};
}

inline PolicyParams random_init(const ExperimentConfig& cfg, std::uint64_t seed) {
    Rng rng = make_stream(seed, 7);
    return net::init_params(cfg.topology(), rng);
}

/// Writes meta_reward.csv, meta_model.bin and meta_reward.svg into `out`.
inline MetaResult meta_train(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out) {
    fs::create_directories(out);
    auto tasks = meta_tasks(cfg, seed);
    std::vector<std::string> header{"epoch"};
    for (int n : cfg.meta_tasks) header.push_back("reward_I" + std::to_string(n));
    for (const char* c : {"summed_reward", "dataset_size", "actor", "critic", "entropy"}) header.emplace_back(c);
    MetaResult result;
    {
        CsvWriter csv(out / "meta_reward.csv", "meta_reward v1", header);
        result = meta::meta_train(tasks, cfg.meta, random_init(cfg, seed), seed, [&](const MetaEpochLog& l) {
            std::vector<std::string> row{std::to_string(l.epoch)};
            for (double r : l.task_rewards) row.push_back(fmt_num(r));
            row.push_back(fmt_num(l.summed_reward));
            row.push_back(std::to_string(l.dataset_size));
            row.push_back(fmt_num(l.loss.actor));
            row.push_back(fmt_num(l.loss.critic));
            row.push_back(fmt_num(l.loss.entropy));
            csv.row(row);
        });
    }
    net::save_params(result.params, (out / "meta_model.bin").string());
    plot::csv_lines(out / "meta_reward.csv", "epoch", {"summed_reward"}, out / "meta_reward.svg",
                    "Meta-training reward", "summed task reward");
    return result;
}

inline std::string model_file(const std::string& stem, int ue) { return stem + "_ue" + std::to_string(ue) + ".bin"; }

/// Runs one benchmark and writes `<out>/<variant>/`: adapt_metrics.csv,
/// checkpoint files, the models to evaluate and reward/entropy plots.
inline baselines::VariantRun adapt(const ExperimentConfig& cfg, Variant variant, std::uint64_t seed,
                                   const std::optional<PolicyParams>& meta_model, const fs::path& out) {
    const fs::path dir = out / to_string(variant);
    fs::create_directories(dir);
    std::vector<std::string> header{"episode",      "reward",         "entropy_channel", "entropy_power",
                                    "mean_sum_ee", "collision_rate", "averaged"};
    for (int i = 0; i < cfg.n_ues; ++i) header.push_back("eta_ue" + std::to_string(i));
    baselines::VariantRun run;
    {
        CsvWriter csv(dir / "adapt_metrics.csv", "adapt_metrics v1", header);
        run = baselines::run_variant(variant, adapt_task(cfg, seed), cfg.fed, meta_model, cfg.topology(), seed,
                                     [&](const fed::EpisodeLog& l) {
                                         std::vector<std::string> row{
                                             std::to_string(l.episode), fmt_num(l.reward),
                                             fmt_num(l.entropy_channel), fmt_num(l.entropy_power),
                                             fmt_num(l.mean_sum_ee),     fmt_num(l.collision_rate),
                                             l.averaged ? "1" : "0"};
                                         for (double e : l.eta) row.push_back(fmt_num(e));
                                         csv.row(row);
                                     });
    }
    for (const auto& [episode, models] : run.adapt.checkpoints)
        for (std::size_t i = 0; i < models.size(); ++i)
            net::save_params(models[i], (dir / model_file("ckpt_ep" + std::to_string(episode), static_cast<int>(i))).string());
    for (std::size_t i = 0; i < run.eval_models.size(); ++i)
        net::save_params(run.eval_models[i], (dir / model_file("eval", static_cast<int>(i))).string());
    plot::csv_lines(dir / "adapt_metrics.csv", "episode", {"reward"}, dir / "reward.svg",
                    to_string(variant) + " training reward", "reward");
    plot::csv_lines(dir / "adapt_metrics.csv", "episode", {"entropy_channel"}, dir / "entropy.svg",
                    to_string(variant) + " policy entropy", "categorical entropy (nats)");
    return run;
}

inline std::vector<PolicyParams> load_eval_models(const fs::path& out, Variant variant, int n_ues) {
    std::vector<PolicyParams> models;
    for (int i = 0; i < n_ues; ++i) {
        const fs::path p = out / to_string(variant) / model_file("eval", i);
        if (!fs::exists(p)) throw std::runtime_error("missing model " + p.string() + " (run adapt first)");
        models.push_back(net::load_params(p.string()));
    }
    return models;
}

struct EvalRow {
    Variant variant;
    DistributionResult result;
};

/// Writes eval_ee.csv and eval_ee.svg for the given models.
inline std::vector<EvalRow> evaluate(const ExperimentConfig& cfg,
                                     const std::vector<std::pair<Variant, std::vector<PolicyParams>>>& models,
                                     std::uint64_t seed, const fs::path& out) {
    fs::create_directories(out);
    EvalOptions opt;
    opt.n_distributions = cfg.eval_distributions;
    opt.n_steps = cfg.eval_steps;
    opt.stochastic = cfg.eval_stochastic;
    opt.grid_points = cfg.oracle_grid_points;
    std::vector<std::vector<DistributionResult>> results(models.size());
    parallel_for(models.size(), cfg.workers, [&](std::size_t k) {
        results[k] = evaluate_policies(models[k].second, cfg.adapt_scenario, cfg.fed.env, opt, seed);
    });
    std::vector<EvalRow> rows;
    {
        CsvWriter csv(out / "eval_ee.csv", "eval_ee v1",
                      {"variant", "distribution", "n_ues", "mean_sum_ee", "oracle_sum_ee", "oracle_gap",
                       "collision_rate"});
        for (std::size_t k = 0; k < models.size(); ++k)
            for (const auto& r : results[k]) {
                csv.row({to_string(models[k].first), std::to_string(r.distribution),
                         std::to_string(models[k].second.size()), fmt_num(r.mean_sum_ee), fmt_num(r.oracle_sum_ee),
                         fmt_num(r.oracle_sum_ee - r.mean_sum_ee), fmt_num(r.collision_rate)});
                rows.push_back({models[k].first, r});
            }
    }
    plot::csv_group_means(out / "eval_ee.csv", "variant", "mean_sum_ee", out / "eval_ee.svg",
                          "Mean evaluated sum EE");
    return rows;
}

/// Writes oracle_sweep.csv and oracle_sweep.svg over UE counts.
inline void oracle(const ExperimentConfig& cfg, int min_ues, int max_ues, std::uint64_t seed, const fs::path& out) {
    if (min_ues < 1 || max_ues < min_ues || max_ues > cfg.adapt_scenario.n_subchannels())
        throw ConfigError("oracle: UE range must satisfy 1 <= min <= max <= subchannels");
    fs::create_directories(out);
    {
        CsvWriter csv(out / "oracle_sweep.csv", "oracle_sweep v1", {"n_ues", "distribution", "oracle_sum_ee"});
        for (int n = min_ues; n <= max_ues; ++n) {
            auto v = oracle_sweep(cfg.adapt_scenario, cfg.fed.env, n, cfg.eval_distributions, cfg.eval_steps,
                                  cfg.oracle_grid_points, seed);
            for (std::size_t d = 0; d < v.size(); ++d) csv.row({std::to_string(n), std::to_string(d), fmt_num(v[d])});
        }
    }
    plot::csv_group_means(out / "oracle_sweep.csv", "n_ues", "oracle_sum_ee", out / "oracle_sweep.svg",
                          "Oracle sum EE by UE count");
}

}  // namespace mfrl::pipeline
