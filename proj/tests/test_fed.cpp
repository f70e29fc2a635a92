#include <algorithm>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mfrl/fed.hpp"

using namespace mfrl;

namespace {

const Topology kTiny{1, 1, 1, 1, 1};

PolicyParams constant_model(const Topology& t, double v) {
    PolicyParams p(t);
    p.weights.setConstant(v);
    return p;
}

PolicyParams random_model(const Topology& t, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    PolicyParams p(t);
    for (Eigen::Index k = 0; k < p.weights.size(); ++k) p.weights(k) = n(rng);
    return p;
}

TaskSpec toy_task(std::uint64_t seed) {
    return {2, with_bandwidths(make_scenario(ScenarioKind::IndoorOffice), {0.36e6, 0.72e6, 1.44e6}), seed};
}

FedConfig quick_config() {
    FedConfig c;
    c.n_episodes = 6;
    c.averaging_period = 2;
    c.adaptation_lr = 1e-3;
    c.checkpoint_episodes = {2, 3};
    c.env.episode_length = 8;
    c.env.reward_coeff = 1e-10;
    return c;
}

PolicyParams small_init(std::uint64_t seed) {
    Rng rng(seed);
    return net::init_params(Topology{5, 16, 16, 3, 8}, rng);
}

}  // namespace

TEST(FedAvgSize, WeightedMeanExample) {
    std::vector<PolicyParams> m{constant_model(kTiny, 0.0), constant_model(kTiny, 4.0)};
    std::vector<double> sizes{1.0, 3.0};
    auto avg = fed::fedavg_size_weighted(m, sizes);
    for (Eigen::Index k = 0; k < avg.weights.size(); ++k) EXPECT_DOUBLE_EQ(avg.weights(k), 3.0);
}

TEST(FedAvgSize, IdenticalModelsAreFixedPoint) {
    Rng rng(3);
    PolicyParams p = random_model(Topology{3, 4, 4, 2, 3}, rng);
    std::vector<PolicyParams> m{p, p, p};
    std::vector<double> sizes{5.0, 1.0, 100.0};
    EXPECT_EQ(fed::fedavg_size_weighted(m, sizes).weights, p.weights);
}

TEST(FedAvgSize, EqualSizesGiveArithmeticMean) {
    Rng rng(5);
    const Topology t{3, 4, 4, 2, 3};
    std::vector<PolicyParams> m{random_model(t, rng), random_model(t, rng), random_model(t, rng)};
    std::vector<double> sizes(3, 200.0);
    auto avg = fed::fedavg_size_weighted(m, sizes);
    for (Eigen::Index k = 0; k < avg.weights.size(); ++k) {
        const double mean = (m[0].weights(k) + m[1].weights(k) + m[2].weights(k)) / 3.0;
        EXPECT_NEAR(avg.weights(k), mean, 1e-15);
    }
}

TEST(FedAvgSize, RejectsTopologyMismatchAndBadWeights) {
    std::vector<PolicyParams> m{constant_model(kTiny, 1.0), constant_model(Topology{2, 1, 1, 1, 1}, 1.0)};
    std::vector<double> sizes{1.0, 1.0};
    EXPECT_THROW(fed::fedavg_size_weighted(m, sizes), std::invalid_argument);
    std::vector<PolicyParams> ok{constant_model(kTiny, 1.0), constant_model(kTiny, 2.0)};
    std::vector<double> zero{0.0, 0.0}, neg{1.0, -1.0};
    EXPECT_THROW(fed::fedavg_size_weighted(ok, zero), std::invalid_argument);
    EXPECT_THROW(fed::fedavg_size_weighted(ok, neg), std::invalid_argument);
    EXPECT_THROW(fed::fedavg_size_weighted(std::vector<PolicyParams>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(FedAvgSuccess, Examples) {
    std::vector<PolicyParams> m{constant_model(kTiny, 10.0), constant_model(kTiny, 0.0)};
    std::vector<double> eta{0.2, 0.8};
    EXPECT_DOUBLE_EQ(fed::fedavg_success_weighted(m, eta).weights(0), 2.0);
    std::vector<double> half{0.5, 0.5};
    EXPECT_DOUBLE_EQ(fed::fedavg_success_weighted(m, half).weights(0), 5.0);
    std::vector<double> first{1.0, 0.0};
    EXPECT_EQ(fed::fedavg_success_weighted(m, first).weights, m[0].weights);
}

TEST(FedAvgSuccess, AllZeroFallsBackToPlainMean) {
    std::vector<PolicyParams> m{constant_model(kTiny, 1.0), constant_model(kTiny, 2.0)};
    std::vector<double> eta{0.0, 0.0};
    bool fell_back = false;
    auto avg = fed::fedavg_success_weighted(m, eta, &fell_back);
    EXPECT_TRUE(fell_back);
    EXPECT_DOUBLE_EQ(avg.weights(0), 1.5);
    std::vector<double> some{0.0, 0.1};
    fed::fedavg_success_weighted(m, some, &fell_back);
    EXPECT_FALSE(fell_back);
}

TEST(FedAvgProperties, ConvexPermutationInvariantSingleIdentity) {
    Rng rng(77);
    const Topology t{2, 3, 3, 2, 2};
    std::uniform_int_distribution<int> count(1, 6);
    std::uniform_real_distribution<double> w(0.0, 1.0);
    for (int c = 0; c < 300; ++c) {
        const int n = count(rng);
        std::vector<PolicyParams> m;
        std::vector<double> eta;
        for (int i = 0; i < n; ++i) {
            m.push_back(random_model(t, rng));
            eta.push_back(w(rng) + 1e-3);
        }
        auto avg = fed::fedavg_success_weighted(m, eta);
        for (Eigen::Index k = 0; k < avg.weights.size(); ++k) {
            double lo = m[0].weights(k), hi = lo;
            for (const auto& x : m) {
                lo = std::min(lo, x.weights(k));
                hi = std::max(hi, x.weights(k));
            }
            ASSERT_GE(avg.weights(k), lo);
            ASSERT_LE(avg.weights(k), hi);
        }
        std::vector<std::size_t> perm(m.size());
        std::iota(perm.begin(), perm.end(), 0u);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<PolicyParams> pm;
        std::vector<double> pe;
        for (auto i : perm) {
            pm.push_back(m[i]);
            pe.push_back(eta[i]);
        }
        auto pavg = fed::fedavg_success_weighted(pm, pe);
        ASSERT_LE((pavg.weights - avg.weights).cwiseAbs().maxCoeff(), 1e-15);
        std::vector<PolicyParams> single{m[0]};
        std::vector<double> one{eta[0]};
        ASSERT_EQ(fed::fedavg_success_weighted(single, one).weights, m[0].weights);
        ASSERT_EQ(fed::fedavg_size_weighted(single, one).weights, m[0].weights);
    }
}

TEST(Weighting, ParseAndPrint) {
    for (auto w : {Weighting::SizeWeighted, Weighting::SuccessWeighted, Weighting::None})
        EXPECT_EQ(parse_weighting(to_string(w)), w);
    EXPECT_THROW(parse_weighting("median"), ConfigError);
}

TEST(Adapt, AveragingScheduleAndBroadcast) {
    FedConfig cfg = quick_config();
    auto res = fed::adapt(small_init(1), toy_task(3), cfg, 9);
    EXPECT_EQ(res.averaging_episodes, (std::vector<int>{2, 4}));
    ASSERT_EQ(res.log.size(), 6u);
    for (const auto& l : res.log) EXPECT_EQ(l.averaged, l.episode == 2 || l.episode == 4);
    // checkpoint 2 is taken right after a broadcast: identical models
    const auto& ck = res.checkpoints.at(2);
    ASSERT_EQ(ck.size(), 2u);
    EXPECT_EQ(ck[0].weights, ck[1].weights);
    // one local update later they diverge again
    const auto& ck3 = res.checkpoints.at(3);
    EXPECT_NE(ck3[0].weights, ck3[1].weights);
}

TEST(Adapt, SuccessRatesResetEachRound) {
    FedConfig cfg = quick_config();
    auto res = fed::adapt(small_init(1), toy_task(3), cfg, 9);
    for (const auto& l : res.log) {
        ASSERT_EQ(l.eta.size(), 2u);
        for (double e : l.eta) {
            EXPECT_GE(e, 0.0);
            EXPECT_LE(e, 1.0);
        }
    }
    // episode 3 opens a new round, so its eta covers exactly one episode of
    // steps: a multiple of 1/episode_length
    for (double e : res.log[2].eta) EXPECT_NEAR(e * 8.0, std::round(e * 8.0), 1e-12);
}

TEST(Adapt, NoWeightingMeansIndependentTraining) {
    FedConfig a = quick_config();
    a.weighting = Weighting::None;
    FedConfig b = a;
    b.averaging_period = 1;
    auto ra = fed::adapt(small_init(1), toy_task(3), a, 9);
    auto rb = fed::adapt(small_init(1), toy_task(3), b, 9);
    EXPECT_TRUE(ra.averaging_episodes.empty());
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(ra.local_models[i].weights, rb.local_models[i].weights);
}

TEST(Adapt, DeterministicForSeed) {
    FedConfig cfg = quick_config();
    auto a = fed::adapt(small_init(1), toy_task(3), cfg, 9);
    auto b = fed::adapt(small_init(1), toy_task(3), cfg, 9);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.local_models[i].weights, b.local_models[i].weights);
    for (std::size_t k = 0; k < a.log.size(); ++k) EXPECT_EQ(a.log[k].reward, b.log[k].reward);
    auto c = fed::adapt(small_init(1), toy_task(3), cfg, 10);
    EXPECT_NE(a.local_models[0].weights, c.local_models[0].weights);
}

TEST(Adapt, LogsFiniteMetrics) {
    FedConfig cfg = quick_config();
    auto res = fed::adapt(small_init(2), toy_task(4), cfg, 1);
    for (const auto& l : res.log) {
        EXPECT_TRUE(std::isfinite(l.reward));
        EXPECT_GE(l.entropy_channel, 0.0);
        EXPECT_LE(l.entropy_channel, std::log(3.0) + 1e-12);
        EXPECT_TRUE(std::isfinite(l.entropy_power));
        EXPECT_GE(l.collision_rate, 0.0);
        EXPECT_LE(l.collision_rate, 1.0);
    }
}

TEST(Adapt, RejectsMismatchedTopology) {
    Rng rng(1);
    PolicyParams wrong = net::init_params(Topology{6, 8, 8, 4, 4}, rng);
    EXPECT_THROW(fed::adapt(wrong, toy_task(1), quick_config(), 1), ConfigError);
}
