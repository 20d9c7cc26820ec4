#include "lanedrop/ddpg.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>

namespace lanedrop {

namespace {

void append_dense(const std::string& name, DenseLayer& layer, std::vector<ParamRef>& out) {
    out.push_back({name + ".weights", &layer.weights});
    out.push_back({name + ".bias", &layer.bias});
}

std::vector<ConstParamRef> to_const(std::vector<ParamRef> refs) {
    return to_const_refs(refs);
}

} // namespace

FusionParams FusionParams::init(std::mt19937_64& rng) {
    FusionParams p;
    p.encoder1 = DenseLayer::init(kNodeFeatureDim, kHiddenWidth, Activation::relu, rng);
    p.encoder2 = DenseLayer::init(kHiddenWidth, kHiddenWidth, Activation::relu, rng);
    p.gcn = GraphConvLayer::init(kHiddenWidth, kHiddenWidth, rng);
    return p;
}

FusionParams FusionParams::zeros() {
    FusionParams p;
    p.encoder1 = DenseLayer::zeros(kNodeFeatureDim, kHiddenWidth, Activation::relu);
    p.encoder2 = DenseLayer::zeros(kHiddenWidth, kHiddenWidth, Activation::relu);
    p.gcn = GraphConvLayer::zeros(kHiddenWidth, kHiddenWidth);
    return p;
}

void FusionParams::append_tensors(const std::string& prefix, std::vector<ParamRef>& out) {
    append_dense(prefix + ".encoder1", encoder1, out);
    append_dense(prefix + ".encoder2", encoder2, out);
    out.push_back({prefix + ".gcn.weights", &gcn.weights});
    out.push_back({prefix + ".gcn.bias", &gcn.bias});
}

ActorParams ActorParams::init(std::mt19937_64& rng) {
    ActorParams p;
    p.fusion = FusionParams::init(rng);
    p.head1 = DenseLayer::init(kHiddenWidth, kHiddenWidth, Activation::relu, rng);
    p.head2 = DenseLayer::init(kHiddenWidth, kHiddenWidth, Activation::relu, rng);
    p.output = DenseLayer::init(kHiddenWidth, 1, Activation::linear, rng);
    return p;
}

ActorParams ActorParams::zeros() {
    ActorParams p;
    p.fusion = FusionParams::zeros();
    p.head1 = DenseLayer::zeros(kHiddenWidth, kHiddenWidth, Activation::relu);
    p.head2 = DenseLayer::zeros(kHiddenWidth, kHiddenWidth, Activation::relu);
    p.output = DenseLayer::zeros(kHiddenWidth, 1, Activation::linear);
    return p;
}

std::vector<ParamRef> ActorParams::tensors(const std::string& prefix) {
    std::vector<ParamRef> out;
    fusion.append_tensors(prefix, out);
    append_dense(prefix + ".head1", head1, out);
    append_dense(prefix + ".head2", head2, out);
    append_dense(prefix + ".output", output, out);
    return out;
}

std::vector<ConstParamRef> ActorParams::tensors(const std::string& prefix) const {
    return to_const(const_cast<ActorParams*>(this)->tensors(prefix));
}

CriticParams CriticParams::init(std::mt19937_64& rng) {
    CriticParams p;
    p.fusion = FusionParams::init(rng);
    p.head1 = DenseLayer::init(kHiddenWidth + 1, kHiddenWidth, Activation::relu, rng);
    p.output = DenseLayer::init(kHiddenWidth, 1, Activation::linear, rng);
    return p;
}

CriticParams CriticParams::zeros() {
    CriticParams p;
    p.fusion = FusionParams::zeros();
    p.head1 = DenseLayer::zeros(kHiddenWidth + 1, kHiddenWidth, Activation::relu);
    p.output = DenseLayer::zeros(kHiddenWidth, 1, Activation::linear);
    return p;
}

std::vector<ParamRef> CriticParams::tensors(const std::string& prefix) {
    std::vector<ParamRef> out;
    fusion.append_tensors(prefix, out);
    append_dense(prefix + ".head1", head1, out);
    append_dense(prefix + ".output", output, out);
    return out;
}

std::vector<ConstParamRef> CriticParams::tensors(const std::string& prefix) const {
    return to_const(const_cast<CriticParams*>(this)->tensors(prefix));
}

Matrix fusion_forward(const GraphObservation& obs, const FusionParams& params, FusionTape* tape) {
    if (obs.features.rows() != obs.node_count() || obs.features.cols() != kNodeFeatureDim) {
        throw ShapeError("fusion_forward: feature matrix does not match the observation's node list");
    }
    const Matrix s = normalize_adjacency(obs.adjacency);
    if (tape == nullptr) {
        const Matrix h = dense_forward(dense_forward(obs.features, params.encoder1), params.encoder2);
        return graphconv_forward(h, s, params.gcn);
    }
    const Matrix h1 = dense_forward(obs.features, params.encoder1, tape->encoder1);
    const Matrix h2 = dense_forward(h1, params.encoder2, tape->encoder2);
    return graphconv_forward(h2, s, params.gcn, tape->gcn);
}

void fusion_backward(const FusionParams& params, const FusionTape& tape, const Matrix& d_embeddings,
                     FusionParams* grad) {
    const Matrix d_h2 = graphconv_backward(params.gcn, tape.gcn, d_embeddings, grad ? &grad->gcn : nullptr);
    const Matrix d_h1 = dense_backward(params.encoder2, tape.encoder2, d_h2, grad ? &grad->encoder2 : nullptr);
    dense_backward(params.encoder1, tape.encoder1, d_h1, grad ? &grad->encoder1 : nullptr);
}

Matrix actor_raw(const GraphObservation& obs, const ActorParams& params, ActorTape* tape) {
    if (tape == nullptr) {
        const Matrix z = fusion_forward(obs, params.fusion);
        return dense_forward(dense_forward(dense_forward(z, params.head1), params.head2), params.output);
    }
    const Matrix z = fusion_forward(obs, params.fusion, &tape->fusion);
    const Matrix a1 = dense_forward(z, params.head1, tape->head1);
    const Matrix a2 = dense_forward(a1, params.head2, tape->head2);
    return dense_forward(a2, params.output, tape->output);
}

void actor_backward(const ActorParams& params, const ActorTape& tape, const Matrix& d_raw, ActorParams* grad) {
    const Matrix d_a2 = dense_backward(params.output, tape.output, d_raw, grad ? &grad->output : nullptr);
    const Matrix d_a1 = dense_backward(params.head2, tape.head2, d_a2, grad ? &grad->head2 : nullptr);
    const Matrix d_z = dense_backward(params.head1, tape.head1, d_a1, grad ? &grad->head1 : nullptr);
    fusion_backward(params.fusion, tape.fusion, d_z, grad ? &grad->fusion : nullptr);
}

double clip_action(double a) {
    return std::clamp(a, -kActionBound, kActionBound);
}

std::vector<double> actor_forward(const GraphObservation& obs, const ActorParams& params) {
    const Matrix raw = actor_raw(obs, params);
    raw.check_finite("actor_forward");
    std::vector<double> actions(raw.rows());
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        actions[i] = clip_action(raw(i, 0));
    }
    return actions;
}

double critic_forward(const GraphObservation& obs, std::span<const double> actions, const CriticParams& params,
                      CriticTape* tape) {
    const std::size_t n = obs.node_count();
    if (actions.size() != n) {
        throw ShapeError("critic_forward: " + std::to_string(actions.size()) + " actions for " + std::to_string(n) +
                         " nodes");
    }
    const Matrix z = fusion_forward(obs, params.fusion, tape ? &tape->fusion : nullptr);
    Matrix pooled(1, kHiddenWidth + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < kHiddenWidth; ++c) {
            pooled(0, c) += z(i, c);
        }
        pooled(0, kHiddenWidth) += actions[i];
    }
    pooled *= 1.0 / static_cast<double>(n);
    Matrix q;
    if (tape == nullptr) {
        q = dense_forward(dense_forward(pooled, params.head1), params.output);
    } else {
        tape->nodes = n;
        q = dense_forward(dense_forward(pooled, params.head1, tape->head1), params.output, tape->output);
    }
    return q(0, 0);
}

std::vector<double> critic_backward(const CriticParams& params, const CriticTape& tape, double d_q,
                                    CriticParams* grad) {
    const Matrix upstream{{d_q}};
    const Matrix d_h = dense_backward(params.output, tape.output, upstream, grad ? &grad->output : nullptr);
    const Matrix d_pooled = dense_backward(params.head1, tape.head1, d_h, grad ? &grad->head1 : nullptr);
    const std::size_t n = tape.nodes;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> d_actions(n, d_pooled(0, kHiddenWidth) * inv_n);
    if (grad != nullptr) {
        Matrix d_z(n, kHiddenWidth);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < kHiddenWidth; ++c) {
                d_z(i, c) = d_pooled(0, c) * inv_n;
            }
        }
        fusion_backward(params.fusion, tape.fusion, d_z, &grad->fusion);
    }
    return d_actions;
}

std::vector<double> OUNoise::sample(std::size_t n, std::mt19937_64& rng) {
    if (state_.size() < n) {
        state_.resize(n, 0.0);
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double diffusion = sigma_ * std::sqrt(dt_);
    for (std::size_t i = 0; i < n; ++i) {
        state_[i] += theta_ * (0.0 - state_[i]) * dt_ + diffusion * gauss(rng);
    }
    return {state_.begin(), state_.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<double> select_action(const GraphObservation& obs, const ActorParams& params, OUNoise& noise,
                                  std::mt19937_64& rng, bool explore) {
    std::vector<double> actions = actor_forward(obs, params);
    if (explore) {
        const auto eps = noise.sample(actions.size(), rng);
        for (std::size_t i = 0; i < actions.size(); ++i) {
            actions[i] = clip_action(actions[i] + eps[i]);
        }
    }
    return actions;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    }
    items_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(Transition t) {
    if (t.actions.size() != t.obs.node_count()) {
        throw ShapeError("ReplayBuffer::push: action count does not match observation");
    }
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
    } else {
        items_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, std::mt19937_64& rng) {
    if (items_.size() < batch || items_.empty()) {
        throw std::logic_error("ReplayBuffer: " + std::to_string(items_.size()) +
                               " transitions stored, minibatch needs " + std::to_string(batch));
    }
    std::vector<std::size_t> out(batch);
    for (auto& i : out) {
        if (cursor_ == order_.size()) {
            order_.resize(items_.size());
            std::iota(order_.begin(), order_.end(), std::size_t{0});
            std::shuffle(order_.begin(), order_.end(), rng);
            cursor_ = 0;
        }
        i = order_[cursor_++];
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(discount > 0.0 && discount < 1.0)) {
        throw ConfigError("train.discount must be in (0, 1)");
    }
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw ConfigError("train.tau must be in (0, 1]");
    }
    if (!(actor_lr >= 0.0) || !(critic_lr >= 0.0)) {
        throw ConfigError("train learning rates must be >= 0");
    }
    if (batch_size < 1) {
        throw ConfigError("train.batch_size must be >= 1");
    }
    if (warmup_steps < 0) {
        throw ConfigError("train.warmup_steps must be >= 0");
    }
    if (!(ou_theta > 0.0) || !(ou_sigma >= 0.0)) {
        throw ConfigError("train.ou_theta must be > 0 and train.ou_sigma >= 0");
    }
    if (buffer_capacity < batch_size) {
        throw ConfigError("train.buffer_capacity must be >= train.batch_size");
    }
    if (total_steps < 0) {
        throw ConfigError("train.total_steps must be >= 0");
    }
    if (max_episodes < 0) {
        throw ConfigError("train.max_episodes must be >= 0");
    }
    if (!(reward_scale > 0.0)) {
        throw ConfigError("train.reward_scale must be positive");
    }
    if (checkpoint_every < 1) {
        throw ConfigError("train.checkpoint_every must be >= 1");
    }
}

double bellman_target(double reward, bool done, double discount, double q_next) {
    return done ? reward : reward + discount * q_next;
}

DdpgAgent::DdpgAgent(const TrainConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), rng_(seed), noise_(cfg.ou_theta, cfg.ou_sigma, 1.0) {
    cfg_.validate();
    actor = ActorParams::init(rng_);
    critic = CriticParams::init(rng_);
    actor_target = actor;
    critic_target = critic;
    actor_opt_ = AdamState::for_params(actor.tensors());
    critic_opt_ = AdamState::for_params(critic.tensors());
}

std::vector<double> DdpgAgent::act(const GraphObservation& obs, bool explore) {
    return select_action(obs, actor, noise_, rng_, explore);
}

std::vector<double> DdpgAgent::random_action(std::size_t n) {
    std::uniform_real_distribution<double> dist(-kActionBound, kActionBound);
    std::vector<double> a(n);
    for (auto& x : a) {
        x = dist(rng_);
    }
    return a;
}

double DdpgAgent::update_critic(const ReplayBuffer& buffer, std::span<const std::size_t> batch) {
    CriticParams grad = CriticParams::zeros();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t idx : batch) {
        const Transition& t = buffer.at(idx);
        double q_next = 0.0;
        if (!t.done) {
            const auto next_actions = actor_forward(t.next_obs, actor_target);
            q_next = critic_forward(t.next_obs, next_actions, critic_target);
        }
        const double y = bellman_target(t.reward * cfg_.reward_scale, t.done, cfg_.discount, q_next);
        CriticTape tape;
        const double q = critic_forward(t.obs, t.actions, critic, &tape);
        const double diff = q - y;
        loss += diff * diff * inv_b;
        critic_backward(critic, tape, 2.0 * diff * inv_b, &grad);
    }
    auto params = critic.tensors();
    const auto grads = std::as_const(grad).tensors();
    adam_step(params, grads, critic_opt_, cfg_.critic_lr);
    return loss;
}

double DdpgAgent::update_actor(const ReplayBuffer& buffer, std::span<const std::size_t> batch) {
    ActorParams grad = ActorParams::zeros();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double objective = 0.0;
    for (std::size_t idx : batch) {
        const Transition& t = buffer.at(idx);
        ActorTape atape;
        const Matrix raw = actor_raw(t.obs, actor, &atape);
        std::vector<double> actions(raw.rows());
        for (std::size_t i = 0; i < raw.rows(); ++i) {
            actions[i] = clip_action(raw(i, 0));
        }
        CriticTape ctape;
        objective += critic_forward(t.obs, actions, critic, &ctape) * inv_b;
        const auto dq_da = critic_backward(critic, ctape, inv_b, nullptr);
        // Descend on -Q. Outside the action bounds the clip blocks the
        // gradient unless it points back into range.
        Matrix d_raw(raw.rows(), 1);
        for (std::size_t i = 0; i < raw.rows(); ++i) {
            const double g = -dq_da[i];
            const double r = raw(i, 0);
            const bool inside = r >= -kActionBound && r <= kActionBound;
            const bool returning = (r > kActionBound && g > 0.0) || (r < -kActionBound && g < 0.0);
            d_raw(i, 0) = inside || returning ? g : 0.0;
        }
        actor_backward(actor, atape, d_raw, &grad);
    }
    auto params = actor.tensors();
    const auto grads = std::as_const(grad).tensors();
    adam_step(params, grads, actor_opt_, cfg_.actor_lr);
    return objective;
}

void DdpgAgent::update_targets() {
    auto at = actor_target.tensors();
    soft_update(at, std::as_const(actor).tensors(), cfg_.tau);
    auto ct = critic_target.tensors();
    soft_update(ct, std::as_const(critic).tensors(), cfg_.tau);
}

UpdateStats DdpgAgent::update(ReplayBuffer& buffer) {
    const auto batch = buffer.sample_indices(static_cast<std::size_t>(cfg_.batch_size), rng_);
    UpdateStats stats;
    stats.critic_loss = update_critic(buffer, batch);
    stats.actor_objective = update_actor(buffer, batch);
    update_targets();
    return stats;
}

double DdpgAgent::mean_q(const ReplayBuffer& buffer, std::span<const std::size_t> batch) const {
    double total = 0.0;
    for (std::size_t idx : batch) {
        const Transition& t = buffer.at(idx);
        total += critic_forward(t.obs, actor_forward(t.obs, actor), critic);
    }
    return total / static_cast<double>(batch.size());
}

std::vector<ParamRef> DdpgAgent::tensors() {
    auto out = actor.tensors("actor");
    auto append = [&out](std::vector<ParamRef> more) { out.insert(out.end(), more.begin(), more.end()); };
    append(critic.tensors("critic"));
    append(actor_target.tensors("actor_target"));
    append(critic_target.tensors("critic_target"));
    return out;
}

std::vector<ConstParamRef> DdpgAgent::tensors() const {
    return to_const_refs(const_cast<DdpgAgent*>(this)->tensors());
}

} // namespace lanedrop
