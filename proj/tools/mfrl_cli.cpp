#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfrl/mfrl.hpp"

using namespace mfrl;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "INI experiment file (defaults when omitted)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "master seed");
    cmd->add_option("--out-dir", c.out_dir, "output directory");
}

ExperimentConfig load(const Common& c) {
    return load_experiment(c.config.empty() ? IniConfig::parse("") : IniConfig::load(c.config));
}

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
    std::vector<Variant> out;
    for (const auto& n : names) {
        if (n == "all") return {Variant::MFRL, Variant::MRL, Variant::FRL, Variant::MARL, Variant::MFRL_EARLY};
        out.push_back(parse_variant(n));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meta-federated PPO for uplink subchannel and power allocation"};
    app.require_subcommand(1);

    Common meta_opts, adapt_opts, eval_opts, oracle_opts;
    auto* meta_cmd = app.add_subcommand("meta-train", "pre-train one initialization across task sizes");
    add_common(meta_cmd, meta_opts);

    auto* adapt_cmd = app.add_subcommand("adapt", "run benchmark variants on the adaptation task");
    add_common(adapt_cmd, adapt_opts);
    std::vector<std::string> adapt_variants{"all"};
    std::string meta_model;
    adapt_cmd->add_option("--variant", adapt_variants, "MFRL, MRL, FRL, MARL, MFRL_early or all");
    adapt_cmd->add_option("--meta-model", meta_model, "pre-trained model (default <out-dir>/meta_model.bin)");

    auto* eval_cmd = app.add_subcommand("evaluate", "freeze adapted policies and measure sum EE");
    add_common(eval_cmd, eval_opts);
    std::vector<std::string> eval_variants{"all"};
    eval_cmd->add_option("--variant", eval_variants, "variants to evaluate (must have been adapted)");

    auto* oracle_cmd = app.add_subcommand("oracle", "oracle sum EE over UE counts");
    add_common(oracle_cmd, oracle_opts);
    int min_ues = 2, max_ues = 0;
    oracle_cmd->add_option("--min-ues", min_ues, "smallest UE count");
    oracle_cmd->add_option("--max-ues", max_ues, "largest UE count (default: subchannel count)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (meta_cmd->parsed()) {
            ExperimentConfig cfg = load(meta_opts);
            MetaResult r = pipeline::meta_train(cfg, meta_opts.seed, meta_opts.out_dir);
            std::cout << "meta-train: " << r.log.size() << " epochs, final summed reward "
                      << fmt_num(r.log.back().summed_reward) << " -> " << meta_opts.out_dir << "\n";
        } else if (adapt_cmd->parsed()) {
            ExperimentConfig cfg = load(adapt_opts);
            auto variants = parse_variants(adapt_variants);
            std::optional<PolicyParams> model;
            bool need_meta = false;
            for (auto v : variants) need_meta = need_meta || uses_meta_init(v);
            if (need_meta) {
                fs::path p = meta_model.empty() ? fs::path(adapt_opts.out_dir) / "meta_model.bin" : fs::path(meta_model);
                if (!fs::exists(p)) throw ConfigError("meta model " + p.string() + " not found (run meta-train first)");
                model = net::load_params(p.string());
            }
            std::vector<baselines::VariantRun> runs(variants.size());
            parallel_for(variants.size(), cfg.workers, [&](std::size_t k) {
                runs[k] = pipeline::adapt(cfg, variants[k], adapt_opts.seed, model, adapt_opts.out_dir);
            });
            for (const auto& r : runs)
                std::cout << "adapt " << to_string(r.variant) << ": final reward " << fmt_num(r.adapt.log.back().reward)
                          << "\n";
        } else if (eval_cmd->parsed()) {
            ExperimentConfig cfg = load(eval_opts);
            std::vector<std::pair<Variant, std::vector<PolicyParams>>> models;
            const bool all = eval_variants.size() == 1 && eval_variants[0] == "all";
            for (auto v : parse_variants(eval_variants)) {
                if (all && !fs::exists(fs::path(eval_opts.out_dir) / to_string(v))) continue;
                models.emplace_back(v, pipeline::load_eval_models(eval_opts.out_dir, v, cfg.n_ues));
            }
            if (models.empty()) throw ConfigError("no adapted variants under " + eval_opts.out_dir);
            auto rows = pipeline::evaluate(cfg, models, eval_opts.seed, eval_opts.out_dir);
            std::cout << "evaluate: " << rows.size() << " rows -> " << eval_opts.out_dir << "/eval_ee.csv\n";
        } else if (oracle_cmd->parsed()) {
            ExperimentConfig cfg = load(oracle_opts);
            if (max_ues == 0) max_ues = cfg.adapt_scenario.n_subchannels();
            pipeline::oracle(cfg, min_ues, max_ues, oracle_opts.seed, oracle_opts.out_dir);
            std::cout << "oracle: -> " << oracle_opts.out_dir << "/oracle_sweep.csv\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
