#include <gtest/gtest.h>

#include <vector>

#include "lanedrop/env.hpp"
#include "support.hpp"

using namespace lanedrop;
using lanedrop::testing::make_vehicle;

namespace {

BottleneckEnv make_env(const ScenarioSpec& spec, RewardConfig reward = {}) {
    return BottleneckEnv(spec, SimParams{}, ObsConfig::for_scenario(spec), reward);
}

} // namespace

TEST(Throughput, EmptyWindowIsZero) {
    const std::vector<double> log{1.0, 2.0};
    EXPECT_EQ(throughput_reward(log, 30.0, RewardConfig{}), 0.0);
}

TEST(Throughput, HandCases) {
    RewardConfig sixty;
    sixty.window_t = 60.0;
    const std::vector<double> five{41.0, 50.0, 60.0, 70.0, 99.0};
    EXPECT_DOUBLE_EQ(throughput_reward(five, 100.0, sixty), 300.0);
    const std::vector<double> one{5.0};
    EXPECT_DOUBLE_EQ(throughput_reward(one, 10.0, RewardConfig{}), 360.0);
}

TEST(Throughput, WindowIsHalfOpen) {
    const std::vector<double> log{10.0, 20.0};
    // (10, 20]: the exit at 10 drops out, the exit at 20 counts
    EXPECT_DOUBLE_EQ(throughput_reward(log, 20.0, RewardConfig{}), 360.0);
}

TEST(VariancePenalty, HandCases) {
    RewardConfig unit;
    unit.beta = 1.0;
    SimState s;
    EXPECT_EQ(variance_penalty(s, 300.0, unit), 0.0);
    s.vehicles = {make_vehicle(0, VehicleKind::hdv, 0, 10.0, 10.0), make_vehicle(1, VehicleKind::hdv, 1, 20.0, 10.0)};
    EXPECT_EQ(variance_penalty(s, 300.0, unit), 0.0);
    s.vehicles[1].speed = 20.0;
    EXPECT_NEAR(variance_penalty(s, 300.0, unit), -12.5, 1e-12);
    // downstream vehicles are ignored
    s.vehicles.push_back(make_vehicle(2, VehicleKind::hdv, 0, 350.0, 0.0));
    EXPECT_NEAR(variance_penalty(s, 300.0, unit), -12.5, 1e-12);
}

TEST(Env, ResetIsDeterministic) {
    auto a = make_env(moderate_scenario());
    auto b = make_env(moderate_scenario());
    const auto oa = a.reset(3);
    const auto ob = b.reset(3);
    EXPECT_EQ(oa.features, ob.features);
    EXPECT_EQ(oa.cav_ids, ob.cav_ids);
    EXPECT_GE(oa.node_count(), 1u);
}

TEST(Env, ModerateBaselineEmptiesCorridor) {
    auto env = make_env(moderate_scenario());
    env.reset(0);
    while (!env.done()) {
        const auto out = env.step_rule_based();
        EXPECT_EQ(out.reward, out.info.r1 + out.info.r2);
        EXPECT_GE(out.info.r1, 0.0);
        EXPECT_LE(out.info.r2, 0.0);
    }
    EXPECT_EQ(env.state().exited_count, 50);
    EXPECT_EQ(env.state().spawned_count, 50);
    EXPECT_LT(env.elapsed_steps(), 2000);
}

TEST(Env, SevereRunsExactHorizon) {
    auto env = make_env(severe_scenario());
    env.reset(0);
    while (!env.done()) {
        env.step_rule_based();
    }
    EXPECT_EQ(env.elapsed_steps(), 1500);
    EXPECT_EQ(env.state().spawned_count, 140);
    EXPECT_LE(env.state().exited_count, 140);
}

TEST(Env, ZeroActionsStillFinish) {
    auto env = make_env(moderate_scenario());
    auto obs = env.reset(0);
    while (!env.done()) {
        obs = env.step(std::vector<double>(obs.node_count(), 0.0)).obs;
    }
    EXPECT_LE(env.elapsed_steps(), 2000);
}

TEST(Env, ContractErrors) {
    auto env = make_env(moderate_scenario());
    const auto obs = env.reset(0);
    EXPECT_THROW(env.step(std::vector<double>(obs.node_count() + 1, 0.0)), std::invalid_argument);
    while (!env.done()) {
        env.step_rule_based();
    }
    EXPECT_THROW(env.step_rule_based(), std::logic_error);
    EXPECT_THROW(env.step(std::vector<double>{}), std::logic_error);
}

TEST(Env, LargerBetaNeverRaisesReward) {
    RewardConfig lo;
    lo.beta = 1.0;
    RewardConfig hi;
    hi.beta = 50.0;
    auto a = make_env(moderate_scenario(), lo);
    auto b = make_env(moderate_scenario(), hi);
    a.reset(0);
    b.reset(0);
    while (!a.done()) {
        const double ra = a.step_rule_based().reward;
        const double rb = b.step_rule_based().reward;
        EXPECT_LE(rb, ra);
    }
}

TEST(Env, ActionSequenceDeterminesRewards) {
    auto run = [] {
        auto env = make_env(moderate_scenario());
        auto obs = env.reset(9);
        std::vector<double> rewards;
        int k = 0;
        while (!env.done()) {
            std::vector<double> a(obs.node_count());
            for (std::size_t i = 0; i < a.size(); ++i) {
                a[i] = ((k + static_cast<int>(i)) % 7 - 3) * 0.5;
            }
            const auto out = env.step(a);
            rewards.push_back(out.reward);
            obs = out.obs;
            ++k;
        }
        return rewards;
    };
    EXPECT_EQ(run(), run());
}
