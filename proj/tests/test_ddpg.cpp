#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lanedrop/ddpg.hpp"
#include "support.hpp"

using namespace lanedrop;
using lanedrop::testing::random_actions;
using lanedrop::testing::random_matrix;
using lanedrop::testing::random_observation;

namespace {

double actor_fd_error(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    ActorParams actor = ActorParams::init(rng);
    const GraphObservation obs = random_observation(n, rng);
    const Matrix w = random_matrix(n, 1, rng);
    auto loss = [&] {
        const Matrix raw = actor_raw(obs, actor);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += raw(i, 0) * w(i, 0);
        }
        return s;
    };
    ActorTape tape;
    actor_raw(obs, actor, &tape);
    ActorParams grad = ActorParams::zeros();
    actor_backward(actor, tape, w, &grad);
    auto params = actor.tensors();
    return finite_diff_check(loss, params, std::as_const(grad).tensors());
}

double critic_fd_error(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    CriticParams critic = CriticParams::init(rng);
    const GraphObservation obs = random_observation(n, rng);
    Matrix actions = Matrix::row_vector(random_actions(n, rng));
    auto loss = [&] { return critic_forward(obs, actions.data(), critic); };
    CriticTape tape;
    critic_forward(obs, actions.data(), critic, &tape);
    CriticParams grad = CriticParams::zeros();
    const Matrix da = Matrix::row_vector(critic_backward(critic, tape, 1.0, &grad));
    auto params = critic.tensors();
    params.push_back({"actions", &actions});
    auto grads = std::as_const(grad).tensors();
    grads.push_back({"actions", &da});
    return finite_diff_check(loss, params, grads);
}

} // namespace

TEST(Actor, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        EXPECT_LT(actor_fd_error(seed, 3), 1e-4) << "seed " << seed;
    }
}

TEST(Critic, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        EXPECT_LT(critic_fd_error(100 + seed, 3), 1e-4) << "seed " << seed;
    }
}

TEST(Actor, ZeroParametersCoast) {
    std::mt19937_64 rng(1);
    const auto obs = random_observation(4, rng);
    for (double a : actor_forward(obs, ActorParams::zeros())) {
        EXPECT_EQ(a, 0.0);
    }
}

TEST(Actor, OutputIsClippedToActionBounds) {
    std::mt19937_64 rng(2);
    ActorParams actor = ActorParams::zeros();
    actor.output.bias(0, 0) = 5.0;
    const auto obs = random_observation(2, rng);
    for (double a : actor_forward(obs, actor)) {
        EXPECT_EQ(a, 3.0);
    }
    actor.output.bias(0, 0) = -7.0;
    for (double a : actor_forward(obs, actor)) {
        EXPECT_EQ(a, -3.0);
    }
    EXPECT_EQ(clip_action(4.0), 3.0);
    EXPECT_EQ(clip_action(-1.5), -1.5);
}

TEST(Shapes, ActorAndCriticForEveryNodeCount) {
    std::mt19937_64 rng(3);
    const ActorParams actor = ActorParams::init(rng);
    const CriticParams critic = CriticParams::init(rng);
    for (std::size_t n = 1; n <= 16; ++n) {
        const auto obs = random_observation(n, rng);
        EXPECT_EQ(actor_raw(obs, actor).rows(), n);
        EXPECT_EQ(actor_raw(obs, actor).cols(), 1u);
        EXPECT_EQ(actor_forward(obs, actor).size(), n);
        EXPECT_TRUE(std::isfinite(critic_forward(obs, random_actions(n, rng), critic)));
    }
}

TEST(Critic, ZeroParametersGiveZeroQ) {
    std::mt19937_64 rng(4);
    const auto obs = random_observation(3, rng);
    EXPECT_EQ(critic_forward(obs, random_actions(3, rng), CriticParams::zeros()), 0.0);
}

TEST(Critic, SensitiveToEachAction) {
    std::mt19937_64 rng(5);
    const CriticParams critic = CriticParams::init(rng);
    const auto obs = random_observation(3, rng);
    std::vector<double> a{0.5, -1.0, 2.0};
    const double q = critic_forward(obs, a, critic);
    a[1] += 0.5;
    EXPECT_NE(critic_forward(obs, a, critic), q);
}

TEST(Critic, ActionCountMismatchThrows) {
    std::mt19937_64 rng(6);
    const auto obs = random_observation(3, rng);
    EXPECT_THROW(critic_forward(obs, std::vector<double>{1.0}, CriticParams::zeros()), ShapeError);
}

TEST(Equivariance, PermutingNodes) {
    std::mt19937_64 rng(7);
    const ActorParams actor = ActorParams::init(rng);
    const CriticParams critic = CriticParams::init(rng);
    GraphObservation obs = random_observation(4, rng);
    const auto actions = random_actions(4, rng);
    const std::vector<std::size_t> perm{3, 1, 0, 2};
    GraphObservation moved = obs;
    std::vector<double> moved_actions(4);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t c = 0; c < kNodeFeatureDim; ++c) {
            moved.features(i, c) = obs.features(perm[i], c);
        }
        moved.cav_ids[i] = obs.cav_ids[perm[i]];
        moved_actions[i] = actions[perm[i]];
    }
    const Matrix out = actor_raw(obs, actor);
    const Matrix out_moved = actor_raw(moved, actor);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(out_moved(i, 0), out(perm[i], 0), 1e-12);
    }
    EXPECT_NEAR(critic_forward(moved, moved_actions, critic), critic_forward(obs, actions, critic), 1e-12);
}

TEST(Noise, SelectActionWithoutExplorationIsDeterministic) {
    std::mt19937_64 rng(8);
    const ActorParams actor = ActorParams::init(rng);
    const auto obs = random_observation(3, rng);
    OUNoise noise;
    EXPECT_EQ(select_action(obs, actor, noise, rng, false), actor_forward(obs, actor));
    OUNoise silent(0.15, 0.0);
    EXPECT_EQ(select_action(obs, actor, silent, rng, true), actor_forward(obs, actor));
}

TEST(Noise, ExploredActionsStayInBounds) {
    std::mt19937_64 rng(9);
    ActorParams actor = ActorParams::zeros();
    actor.output.bias(0, 0) = 2.9;
    const auto obs = random_observation(5, rng);
    OUNoise noise(0.15, 3.0);
    for (int k = 0; k < 2000; ++k) {
        for (double a : select_action(obs, actor, noise, rng, true)) {
            ASSERT_GE(a, -3.0);
            ASSERT_LE(a, 3.0);
        }
    }
}

TEST(Noise, OrnsteinUhlenbeckStationarySpread) {
    // Discrete OU with dt = 1: x' = (1 - theta) x + sigma e, whose stationary
    // variance is sigma^2 / (1 - (1 - theta)^2); the continuous-time value
    // sigma^2 / (2 theta) is within 10% of it for theta = 0.15.
    std::mt19937_64 rng(10);
    OUNoise noise(0.15, 0.6);
    for (int k = 0; k < 500; ++k) {
        noise.sample(1, rng);
    }
    double sq = 0.0;
    const int steps = 100000;
    for (int k = 0; k < steps; ++k) {
        const double x = noise.sample(1, rng)[0];
        sq += x * x;
    }
    const double empirical = std::sqrt(sq / steps);
    const double stationary = 0.6 / std::sqrt(2.0 * 0.15);
    EXPECT_NEAR(empirical / stationary, 1.0, 0.1);
}

TEST(Bellman, TerminalAndBootstrapTargets) {
    EXPECT_EQ(bellman_target(1.5, true, 0.99, 123.0), 1.5);
    EXPECT_NEAR(bellman_target(1.0, false, 0.99, 2.0), 2.98, 1e-12);
}

TEST(Replay, RingOverwritesOldest) {
    std::mt19937_64 rng(11);
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) {
        Transition t;
        t.obs = random_observation(1, rng);
        t.actions = {0.0};
        t.reward = i;
        buf.push(t);
    }
    EXPECT_EQ(buf.size(), 3u);
    std::vector<double> rewards;
    for (std::size_t i = 0; i < 3; ++i) {
        rewards.push_back(buf.at(i).reward);
    }
    std::sort(rewards.begin(), rewards.end());
    EXPECT_EQ(rewards, (std::vector<double>{2.0, 3.0, 4.0}));
}

TEST(Replay, UnderfullSamplingThrows) {
    ReplayBuffer buf(10);
    std::mt19937_64 rng(12);
    EXPECT_THROW(buf.sample_indices(4, rng), std::logic_error);
}

TEST(Replay, SamplingIsUniform) {
    std::mt19937_64 rng(13);
    ReplayBuffer buf(100);
    for (int i = 0; i < 100; ++i) {
        Transition t;
        t.obs = random_observation(1, rng);
        t.actions = {0.0};
        buf.push(t);
    }
    std::vector<int> counts(100, 0);
    // 1563 minibatches of 64 is just over 1e5 draws.
    for (int draw = 0; draw < 1563; ++draw) {
        for (std::size_t idx : buf.sample_indices(64, rng)) {
            ++counts[idx];
        }
    }
    for (int c : counts) {
        EXPECT_NEAR(c, 1000, 50);
    }
}

TEST(Replay, MinibatchHasNoRepeatsWithinAPass) {
    std::mt19937_64 rng(14);
    ReplayBuffer buf(64);
    for (int i = 0; i < 64; ++i) {
        Transition t;
        t.obs = random_observation(1, rng);
        t.actions = {0.0};
        buf.push(t);
    }
    auto batch = buf.sample_indices(64, rng);
    std::sort(batch.begin(), batch.end());
    EXPECT_EQ(std::adjacent_find(batch.begin(), batch.end()), batch.end());
}

namespace {

ReplayBuffer filled_buffer(std::size_t n, std::mt19937_64& rng, bool terminal, double reward) {
    ReplayBuffer buf(n);
    for (std::size_t i = 0; i < n; ++i) {
        Transition t;
        const std::size_t nodes = 1 + i % 4;
        t.obs = random_observation(nodes, rng);
        t.actions = random_actions(nodes, rng);
        t.reward = reward;
        t.done = terminal;
        if (!terminal) {
            t.next_obs = random_observation(1 + (i + 1) % 4, rng);
        }
        buf.push(t);
    }
    return buf;
}

} // namespace

TEST(Update, ZeroLossLeavesCriticUnchanged) {
    std::mt19937_64 rng(14);
    TrainConfig cfg;
    cfg.batch_size = 8;
    DdpgAgent agent(cfg, 1);
    agent.critic = CriticParams::zeros();
    agent.critic_target = CriticParams::zeros();
    ReplayBuffer buf = filled_buffer(16, rng, true, 0.0);
    const CriticParams before = agent.critic;
    const auto batch = buf.sample_indices(8, rng);
    EXPECT_EQ(agent.update_critic(buf, batch), 0.0);
    auto a = std::as_const(agent.critic).tensors();
    auto b = before.tensors();
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(*a[i].value, *b[i].value) << a[i].name;
    }
}

TEST(Update, ActorStepDoesNotDecreaseMeanQ) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        TrainConfig cfg;
        cfg.batch_size = 16;
        cfg.actor_lr = 1e-5;
        DdpgAgent agent(cfg, seed);
        ReplayBuffer buf = filled_buffer(32, rng, false, 1.0);
        const auto batch = buf.sample_indices(16, rng);
        const double before = agent.update_actor(buf, batch);
        EXPECT_GE(agent.mean_q(buf, batch), before - 1e-12) << "seed " << seed;
    }
}

TEST(Update, RequiresFullBatch) {
    std::mt19937_64 rng(15);
    TrainConfig cfg;
    DdpgAgent agent(cfg, 2);
    ReplayBuffer buf = filled_buffer(10, rng, true, 0.0);
    EXPECT_THROW(agent.update(buf), std::logic_error);
}

TEST(Update, TargetsTrackOnlineNetworks) {
    TrainConfig cfg;
    cfg.tau = 1.0;
    DdpgAgent agent(cfg, 3);
    std::mt19937_64 rng(16);
    agent.actor = ActorParams::init(rng);
    agent.update_targets();
    auto online = std::as_const(agent.actor).tensors();
    auto target = std::as_const(agent.actor_target).tensors("actor_target");
    for (std::size_t i = 0; i < online.size(); ++i) {
        EXPECT_EQ(*online[i].value, *target[i].value);
    }
}

TEST(Config, DefaultsMirrorTrainingSetup) {
    const TrainConfig cfg;
    EXPECT_EQ(cfg.batch_size, 64);
    EXPECT_EQ(cfg.warmup_steps, 1000);
    EXPECT_EQ(cfg.tau, 1e-3);
    EXPECT_EQ(cfg.actor_lr, 1e-4);
    EXPECT_EQ(cfg.critic_lr, 1e-3);
    EXPECT_EQ(cfg.discount, 0.99);
    EXPECT_EQ(cfg.buffer_capacity, 100000);
    EXPECT_NO_THROW(cfg.validate());
}
