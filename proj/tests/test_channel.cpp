#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mfrl/channel.hpp"

using namespace mfrl;
using namespace mfrl::channel;

namespace {

// hand-calculator style oracles, written independently of the library
double oracle_pl(double f, double d) { return 32.4 + 20.0 * std::log(f) / std::log(10.0) + 30.0 * std::log(d) / std::log(10.0); }

ScenarioConfig small_scenario() {
    return with_bandwidths(make_scenario(ScenarioKind::UrbanMicro), {0.18e6, 0.36e6, 1.44e6});
}

}  // namespace

TEST(Pathloss, PinnedValues) {
    EXPECT_NEAR(pathloss_db(1.0, 100.0), 92.4, 1e-12);
    EXPECT_NEAR(pathloss_db(6.0, 100.0), 107.9630, 1e-3);
    EXPECT_NEAR(pathloss_db(6.0, 1.0), 47.9630, 1e-3);
    EXPECT_NEAR(pathloss_db(6.0, 37.5), oracle_pl(6.0, 37.5), 1e-10);
}

TEST(Pathloss, RejectsBadInputs) {
    EXPECT_THROW(pathloss_db(6.0, 0.5), std::invalid_argument);
    EXPECT_THROW(pathloss_db(0.0, 10.0), std::invalid_argument);
}

TEST(Pathloss, MonotoneInDistanceAndFrequency) {
    Rng rng(3);
    std::uniform_real_distribution<double> d(1.0, 2000.0), f(0.5, 100.0);
    for (int k = 0; k < 1000; ++k) {
        double d1 = d(rng), d2 = d(rng), f1 = f(rng), f2 = f(rng);
        if (d1 > d2) std::swap(d1, d2);
        if (f1 > f2) std::swap(f1, f2);
        EXPECT_LE(pathloss_db(f1, d1), pathloss_db(f1, d2));
        EXPECT_LE(pathloss_db(f1, d1), pathloss_db(f2, d1));
    }
}

TEST(ChannelGain, PinnedValues) {
    EXPECT_DOUBLE_EQ(channel_gain(100.0, 1.0, 1.0), 1e-10);
    EXPECT_DOUBLE_EQ(channel_gain(0.0, 1.0, 1.0), 1.0);
    EXPECT_NEAR(channel_gain(92.4, 2.0, 0.5) / 5.7544e-10, 1.0, 1e-4);
}

TEST(NoisePower, PinnedValues) {
    EXPECT_NEAR(noise_power_w(1.0, -170.0, 0.0) / 1e-20, 1.0, 1e-12);
    EXPECT_NEAR(noise_power_w(0.18e6, -170.0, 0.0) / 1.8e-15, 1.0, 1e-12);
    EXPECT_NEAR(noise_power_w(1.44e6, -160.0, 5.0) / 4.5537e-13, 1.0, 1e-4);
}

TEST(Snr, PinnedValues) {
    EXPECT_EQ(snr(false, 0.3, 0.1, 1e-9), 0.0);
    EXPECT_NEAR(snr(true, 1e-10, 0.1, 1.8e-15), 5555.56, 0.01);
    EXPECT_DOUBLE_EQ(snr(true, 1.0, 1.0, 1.0), 1.0);
}

TEST(EnergyEfficiency, PinnedValues) {
    EXPECT_EQ(energy_efficiency(0.18e6, 0.1, 100.0, false), 0.0);
    EXPECT_NEAR(energy_efficiency(0.18e6, 0.1, 5555.56, true) / 2.2392e7, 1.0, 1e-3);
    EXPECT_DOUBLE_EQ(energy_efficiency(1.0, 1.0, 1.0, true), 1.0);
    EXPECT_THROW(energy_efficiency(1.0, 0.0, 1.0, true), std::invalid_argument);
}

TEST(PowerConversion, RoundTrip) {
    EXPECT_DOUBLE_EQ(dbm_to_w(30.0), 1.0);
    EXPECT_DOUBLE_EQ(dbm_to_w(0.0), 1e-3);
    for (double dbm : {-10.0, 0.0, 7.5, 24.0}) EXPECT_NEAR(w_to_dbm(dbm_to_w(dbm)), dbm, 1e-12);
}

TEST(ChannelState, GainDecompositionHoldsAfterEveryAdvance) {
    ScenarioConfig cfg = small_scenario();
    Rng rng(11);
    auto ues = place_ues(cfg, 3, rng);
    ChannelState st = make_channel(cfg, ues, rng);
    for (int step = 0; step < 350; ++step) {
        advance(cfg, st, ues, rng);
        for (int i = 0; i < st.n_ues(); ++i)
            for (int n = 0; n < st.n_subchannels(); ++n) {
                double expect = std::pow(10.0, -st.pathloss_db(i, n) / 10.0) * st.shadowing_lin(i, n) *
                                st.fading_power_lin(i, n);
                ASSERT_NEAR(st.gain_lin(i, n) / expect, 1.0, 1e-12);
                ASSERT_GT(st.gain_lin(i, n), 0.0);
                ASSERT_TRUE(std::isfinite(st.gain_lin(i, n)));
            }
    }
}

TEST(ChannelState, UpdateCadence) {
    ScenarioConfig cfg = small_scenario();
    Rng rng(5);
    auto ues = place_ues(cfg, 2, rng);
    ChannelState st = make_channel(cfg, ues, rng);
    ChannelState before = st;
    advance(cfg, st, ues, rng);
    EXPECT_EQ(st.step_counter, 1);
    EXPECT_EQ(st.pathloss_db, before.pathloss_db);
    EXPECT_EQ(st.shadowing_lin, before.shadowing_lin);
    EXPECT_NE(st.fading_power_lin, before.fading_power_lin);

    while (st.step_counter < 99) advance(cfg, st, ues, rng);
    const auto ues_99 = ues;
    const Matrix pl_99 = st.pathloss_db;
    const Matrix sh_99 = st.shadowing_lin;
    advance(cfg, st, ues, rng);
    EXPECT_EQ(st.step_counter, 100);
    EXPECT_NE(ues, ues_99);
    EXPECT_NE(st.shadowing_lin, sh_99);
    // pathloss follows the new positions (movement can be sub-millimetre, so
    // compare against a recomputation rather than requiring a change)
    ChannelState check = st;
    recompute_pathloss(cfg, ues, check);
    EXPECT_EQ(check.pathloss_db, st.pathloss_db);
    (void)pl_99;
}

TEST(ChannelState, SameSeedSameTrajectory) {
    ScenarioConfig cfg = small_scenario();
    auto run = [&](std::uint64_t seed) {
        Rng rng(seed);
        auto ues = place_ues(cfg, 3, rng);
        ChannelState st = make_channel(cfg, ues, rng);
        std::vector<ChannelState> traj;
        for (int k = 0; k < 250; ++k) {
            advance(cfg, st, ues, rng);
            traj.push_back(st);
        }
        return traj;
    };
    EXPECT_EQ(run(42), run(42));
    EXPECT_NE(run(42), run(43));
}

TEST(ChannelState, UesStayInsideSquare) {
    ScenarioConfig cfg = small_scenario();
    cfg.area_side_m = 2.0;
    cfg.ue_max_speed_mps = 1.0;
    Rng rng(8);
    auto ues = place_ues(cfg, 5, rng);
    for (int k = 0; k < 500; ++k) {
        move_ues(cfg, ues, 3.7, rng);
        for (const auto& ue : ues) {
            ASSERT_LE(std::abs(ue.x), 1.0);
            ASSERT_LE(std::abs(ue.y), 1.0);
            ASSERT_GE(ue.speed, 0.0);
            ASSERT_LE(ue.speed, 1.0);
        }
    }
}

TEST(ChannelStatistics, FadingHasUnitMean) {
    ChannelState st{Matrix(10, 10), Matrix(10, 10, 1.0), Matrix(10, 10), Matrix(10, 10), 0};
    Rng rng(99);
    double sum = 0.0;
    long count = 0;
    for (int k = 0; k < 1000; ++k) {
        draw_fading(st, rng);
        for (double m : st.fading_power_lin.data) sum += m;
        count += static_cast<long>(st.fading_power_lin.data.size());
    }
    const double mean = sum / static_cast<double>(count);
    EXPECT_GE(mean, 0.99);
    EXPECT_LE(mean, 1.01);
}

TEST(ChannelStatistics, ShadowingLogMomentsMatchSigma) {
    ScenarioConfig cfg = small_scenario();
    ChannelState st{Matrix(10, 10), Matrix(10, 10), Matrix(10, 10, 1.0), Matrix(10, 10), 0};
    Rng rng(123);
    double s1 = 0.0, s2 = 0.0;
    long count = 0;
    for (int k = 0; k < 1000; ++k) {
        draw_shadowing(cfg, st, rng);
        for (double v : st.shadowing_lin.data) {
            double l = std::log(v);
            s1 += l;
            s2 += l * l;
            ++count;
        }
    }
    const double mean = s1 / static_cast<double>(count);
    const double sd = std::sqrt(s2 / static_cast<double>(count) - mean * mean);
    const double target = cfg.shadowing_sigma_db * std::log(10.0) / 10.0;
    EXPECT_LT(std::abs(mean), 0.02 * target);
    EXPECT_NEAR(sd / target, 1.0, 0.02);
}

TEST(ChannelStatistics, PerUeShadowingSharedAcrossSubchannels) {
    ScenarioConfig cfg = small_scenario();
    cfg.shadowing_per_subchannel = false;
    ChannelState st{Matrix(4, 3), Matrix(4, 3), Matrix(4, 3, 1.0), Matrix(4, 3), 0};
    Rng rng(1);
    draw_shadowing(cfg, st, rng);
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(st.shadowing_lin(i, 0), st.shadowing_lin(i, 1));
        EXPECT_EQ(st.shadowing_lin(i, 0), st.shadowing_lin(i, 2));
    }
}

TEST(ChannelState, AntennaGainsReducePathloss) {
    ScenarioConfig cfg = small_scenario();
    std::vector<UEState> ues{{30.0, 40.0, 1.5, 0.0, 0.0}};
    ChannelState st{Matrix(1, 3), Matrix(1, 3, 1.0), Matrix(1, 3, 1.0), Matrix(1, 3), 0};
    recompute_pathloss(cfg, ues, st);
    const double d = std::sqrt(30.0 * 30.0 + 40.0 * 40.0 + 8.5 * 8.5);
    EXPECT_NEAR(st.pathloss_db(0, 0), oracle_pl(6.0, d) - 11.0, 1e-10);
}

TEST(NoisePowers, UseBsNoiseFigure) {
    ScenarioConfig cfg = make_scenario(ScenarioKind::IndoorOffice);
    auto noise = noise_powers_w(cfg);
    ASSERT_EQ(noise.size(), 10u);
    EXPECT_NEAR(noise[8] / 4.5537e-13, 1.0, 1e-4);
}
