#pragma once

#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mfrl/env.hpp"
#include "mfrl/net.hpp"
#include "mfrl/ppo.hpp"
#include "mfrl/rollout.hpp"

namespace mfrl {

/// Pre-training at the BS: one global model, experience pooled across tasks
/// with different UE counts, one PPO update per epoch.
struct MetaConfig {
    int n_epochs = 150;
    double meta_lr = 5e-7;
    int batch_size = 256;
    PpoConfig ppo;
    EnvConfig env;
};

/// Pooled transitions from every task and UE, tagged with the task id.
using CentralDataset = RolloutBuffer;

struct MetaEpochLog {
    int epoch = 0;
    std::vector<double> task_rewards;
    double summed_reward = 0.0;
    std::size_t dataset_size = 0;
    LossTerms loss;
};

struct MetaResult {
    PolicyParams params;
    std::vector<MetaEpochLog> log;
};

namespace meta {

/// Uniform sample without replacement; the whole dataset when it holds no
/// more than `batch_size` items.
inline RolloutBuffer sample_batch(const CentralDataset& dataset, int batch_size, Rng& rng) {
    if (dataset.empty()) throw std::invalid_argument("sample_batch: empty dataset");
    if (!dataset.advantages_ready) throw std::logic_error("sample_batch: advantages not computed");
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t take = std::min(idx.size(), static_cast<std::size_t>(std::max(batch_size, 0)));
    for (std::size_t k = 0; k < take; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
        std::swap(idx[k], idx[pick(rng)]);
    }
    RolloutBuffer out;
    out.transitions.reserve(take);
    out.advantages.reserve(take);
    for (std::size_t k = 0; k < take; ++k) {
        out.transitions.push_back(dataset.transitions[idx[k]]);
        out.advantages.push_back(dataset.advantages[idx[k]]);
    }
    out.advantages_ready = true;
    return out;
}

inline void check_tasks(std::span<const TaskSpec> tasks) {
    if (tasks.empty()) throw ConfigError("meta_train: empty task list");
    const int n_sub = tasks.front().scenario.n_subchannels();
    for (const auto& t : tasks) {
        if (t.scenario.n_subchannels() != n_sub)
            throw ConfigError("meta_train: every task must share the subchannel count");
        if (t.n_ues > t.scenario.n_subchannels())
            throw ConfigError("meta_train: task with " + std::to_string(t.n_ues) + " UEs exceeds " +
                              std::to_string(t.scenario.n_subchannels()) + " subchannels");
        if (t.n_ues < 1) throw ConfigError("meta_train: task needs at least one UE");
    }
}

using EpochCallback = std::function<void(const MetaEpochLog&)>;

/// Each epoch runs the current global policy for one episode in every task,
/// pools the transitions, samples a batch and applies one PPO update. The
/// dataset is cleared after the update.
inline MetaResult meta_train(std::span<const TaskSpec> tasks, const MetaConfig& cfg, PolicyParams initial,
                             std::uint64_t seed, const EpochCallback& on_epoch = {}) {
    check_tasks(tasks);
    cfg.ppo.validate();
    if (initial.topology.input != tasks.front().scenario.n_subchannels() + 2 ||
        initial.topology.n_channels != tasks.front().scenario.n_subchannels())
        throw ConfigError("meta_train: network topology does not match the tasks");

    struct TaskRun {
        Environment env;
        Rng env_rng;
        Rng policy_rng;
    };
    std::vector<TaskRun> runs;
    runs.reserve(tasks.size());
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        const TaskSpec& t = tasks[k];
        TaskRun run{Environment(t.scenario, cfg.env), make_stream(t.seed, 2 * k + 1), make_stream(seed, 2 * k + 2)};
        run.env.reset(t.n_ues, run.env_rng);
        runs.push_back(std::move(run));
    }
    Rng update_rng = make_stream(seed, 0);

    MetaResult result{std::move(initial), {}};
    net::OptimizerState opt(result.params.weights.size(), net::AdamConfig{cfg.meta_lr});
    CentralDataset dataset;
    for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
        MetaEpochLog log;
        log.epoch = epoch;
        for (std::size_t k = 0; k < runs.size(); ++k) {
            auto& run = runs[k];
            std::vector<const PolicyParams*> policies(static_cast<std::size_t>(run.env.n_ues()), &result.params);
            EpisodeResult ep = run_episode(run.env, policies, run.env_rng, run.policy_rng);
            log.task_rewards.push_back(ep.total_reward);
            log.summed_reward += ep.total_reward;
            for (auto& buf : ep.per_ue) {
                for (auto& t : buf.transitions) t.task_id = static_cast<int>(k);
                buf.compute_advantages(cfg.ppo);
                dataset.append(std::move(buf));
            }
        }
        log.dataset_size = dataset.size();
        RolloutBuffer batch = meta::sample_batch(dataset, cfg.batch_size, update_rng);
        PpoConfig ppo_cfg = cfg.ppo;
        ppo_cfg.minibatch_size = std::max(ppo_cfg.minibatch_size, static_cast<int>(batch.size()));
        log.loss = ppo_update(result.params, opt, batch, ppo_cfg, update_rng).before;
        dataset.clear();
        if (on_epoch) on_epoch(log);
        result.log.push_back(std::move(log));
    }
    return result;
}

}  // namespace meta
}  // namespace mfrl
