#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lanedrop/nn.hpp"
#include "lanedrop/obs_graph.hpp"

namespace lanedrop {

inline constexpr std::size_t kHiddenWidth = 32;

/// Encoder phi (two relu Dense layers) followed by one graph convolution g.
struct FusionParams {
    DenseLayer encoder1;
    DenseLayer encoder2;
    GraphConvLayer gcn;

    static FusionParams init(std::mt19937_64& rng);
    static FusionParams zeros();
    void append_tensors(const std::string& prefix, std::vector<ParamRef>& out);
};

/// Per-node actor: fusion block then Dense(32) + Dense(32) + Dense(1, linear).
struct ActorParams {
    FusionParams fusion;
    DenseLayer head1;
    DenseLayer head2;
    DenseLayer output;

    static ActorParams init(std::mt19937_64& rng);
    static ActorParams zeros();
    std::vector<ParamRef> tensors(const std::string& prefix = "actor");
    std::vector<ConstParamRef> tensors(const std::string& prefix = "actor") const;
};

/// Critic: fusion block, per-node (embedding ++ action) mean-pooled over
/// nodes, then Dense(32) + Dense(1, linear).
struct CriticParams {
    FusionParams fusion;
    DenseLayer head1;
    DenseLayer output;

    static CriticParams init(std::mt19937_64& rng);
    static CriticParams zeros();
    std::vector<ParamRef> tensors(const std::string& prefix = "critic");
    std::vector<ConstParamRef> tensors(const std::string& prefix = "critic") const;
};

struct FusionTape {
    DenseCache encoder1;
    DenseCache encoder2;
    GraphConvCache gcn;
};

struct ActorTape {
    FusionTape fusion;
    DenseCache head1;
    DenseCache head2;
    DenseCache output;
};

struct CriticTape {
    FusionTape fusion;
    std::size_t nodes = 0;
    DenseCache head1;
    DenseCache output;
};

/// Node embeddings Z = g(phi(X), A).
Matrix fusion_forward(const GraphObservation& obs, const FusionParams& params, FusionTape* tape = nullptr);
/// Accumulates gradients into `grad` (may be null).
void fusion_backward(const FusionParams& params, const FusionTape& tape, const Matrix& d_embeddings,
                     FusionParams* grad);

/// Unclipped per-node actor output, N x 1.
Matrix actor_raw(const GraphObservation& obs, const ActorParams& params, ActorTape* tape = nullptr);
void actor_backward(const ActorParams& params, const ActorTape& tape, const Matrix& d_raw, ActorParams* grad);

/// Actions clipped to [-3, 3], ordered like obs.cav_ids.
std::vector<double> actor_forward(const GraphObservation& obs, const ActorParams& params);

double critic_forward(const GraphObservation& obs, std::span<const double> actions, const CriticParams& params,
                      CriticTape* tape = nullptr);
/// Back-propagates dQ. Accumulates parameter gradients into `grad` (may be
/// null) and returns dQ/da per node.
std::vector<double> critic_backward(const CriticParams& params, const CriticTape& tape, double d_q,
                                    CriticParams* grad);

double clip_action(double a);

/// Per-node Ornstein-Uhlenbeck process, x += theta * (0 - x) * dt + sigma * sqrt(dt) * N(0, 1).
class OUNoise {
public:
    OUNoise(double theta = 0.15, double sigma = 0.6, double dt = 1.0) : theta_(theta), sigma_(sigma), dt_(dt) {}

    void reset() { state_.clear(); }
    /// Advances n processes; new nodes start at zero.
    std::vector<double> sample(std::size_t n, std::mt19937_64& rng);

    double theta() const noexcept { return theta_; }
    double sigma() const noexcept { return sigma_; }

private:
    double theta_;
    double sigma_;
    double dt_;
    std::vector<double> state_;
};

/// actor_forward plus (when exploring) OU noise, clipped to [-3, 3].
std::vector<double> select_action(const GraphObservation& obs, const ActorParams& params, OUNoise& noise,
                                  std::mt19937_64& rng, bool explore);

struct Transition {
    GraphObservation obs;
    std::vector<double> actions;
    double reward = 0.0;
    GraphObservation next_obs; // may be empty when done
    bool done = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    const Transition& at(std::size_t i) const { return items_.at(i); }

    /// Uniform sampling from a reshuffled pass over the stored items; every
    /// item is drawn once per pass. Items pushed mid-pass join the next pass.
    std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng);

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> items_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

struct TrainConfig {
    double discount = 0.99;
    double tau = 1e-3;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    int batch_size = 64;
    int warmup_steps = 1000;
    double ou_theta = 0.15;
    double ou_sigma = 0.6;
    int buffer_capacity = 100000;
    std::int64_t total_steps = 1000000;
    int max_episodes = 0;      // 0 = bounded by total_steps only
    double reward_scale = 1e-3; // applied to rewards before they enter the critic
    int checkpoint_every = 50; // episodes

    void validate() const;
};

/// y = r + discount * q_next, or r for terminal transitions.
double bellman_target(double reward, bool done, double discount, double q_next);

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
};

/// Centralized multi-agent DDPG with target networks and soft updates.
class DdpgAgent {
public:
    DdpgAgent(const TrainConfig& cfg, std::uint64_t seed);

    ActorParams actor;
    CriticParams critic;
    ActorParams actor_target;
    CriticParams critic_target;

    void begin_episode() { noise_.reset(); }
    std::vector<double> act(const GraphObservation& obs, bool explore);
    std::vector<double> random_action(std::size_t n);

    /// Critic step on the given minibatch; returns the mean squared TD error.
    double update_critic(const ReplayBuffer& buffer, std::span<const std::size_t> batch);
    /// Actor step along the sampled policy gradient; returns mean Q before the step.
    double update_actor(const ReplayBuffer& buffer, std::span<const std::size_t> batch);
    void update_targets();

    /// Samples a minibatch, updates critic then actor, then soft-updates targets.
    UpdateStats update(ReplayBuffer& buffer);

    double mean_q(const ReplayBuffer& buffer, std::span<const std::size_t> batch) const;

    std::vector<ParamRef> tensors();
    std::vector<ConstParamRef> tensors() const;

    const TrainConfig& config() const noexcept { return cfg_; }
    std::mt19937_64& rng() noexcept { return rng_; }

private:
    TrainConfig cfg_;
    std::mt19937_64 rng_;
    OUNoise noise_;
    AdamState actor_opt_;
    AdamState critic_opt_;
};

} // namespace lanedrop
