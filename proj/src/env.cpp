#include "lanedrop/env.hpp"

#include <algorithm>

namespace lanedrop {

void RewardConfig::validate() const {
    if (!(beta >= 0.0)) {
        throw ConfigError("reward.beta must be >= 0");
    }
    if (!(window_t > 0.0)) {
        throw ConfigError("reward.window_t must be positive");
    }
}

double throughput_reward(std::span<const double> exit_log, double now, const RewardConfig& cfg) {
    constexpr double eps = 1e-9; // exit times sit on the substep grid
    const double lo = now - cfg.window_t + eps;
    const double hi = now + eps;
    int count = 0;
    for (auto it = exit_log.rbegin(); it != exit_log.rend() && *it > lo; ++it) {
        if (*it <= hi) {
            ++count;
        }
    }
    return 3600.0 * count / cfg.window_t;
}

double variance_penalty(const SimState& state, double first_drop, const RewardConfig& cfg) {
    std::vector<double> speeds;
    for (const auto& v : state.vehicles) {
        if (v.position < first_drop) {
            speeds.push_back(v.speed);
        }
    }
    if (speeds.empty()) {
        return 0.0;
    }
    const double n = static_cast<double>(speeds.size());
    double mean = 0.0;
    for (double s : speeds) {
        mean += s;
    }
    mean /= n;
    double var = 0.0;
    for (double s : speeds) {
        var += (s - mean) * (s - mean);
    }
    var /= n;
    return -cfg.beta * var / n;
}

BottleneckEnv::BottleneckEnv(ScenarioSpec scenario, SimParams sim, ObsConfig obs, RewardConfig reward)
    : scenario_(std::move(scenario)), sim_(sim), obs_cfg_(obs), reward_(reward) {
    scenario_.validate();
    sim_.validate();
    obs_cfg_.validate();
    reward_.validate();
    if (scenario_.cav_count < 1) {
        throw ConfigError("environment needs a scenario with at least one CAV");
    }
}

GraphObservation BottleneckEnv::reset(std::uint64_t seed) {
    state_ = SimState(seed);
    trajectory_.clear();
    elapsed_ = 0;
    done_ = false;
    while (state_.cav_count() == 0) {
        advance_second({});
    }
    obs_ = observe(state_, obs_cfg_);
    return obs_;
}

StepOutcome BottleneckEnv::step(std::span<const double> actions) {
    if (done_) {
        throw std::logic_error("BottleneckEnv::step: episode is done, call reset()");
    }
    if (actions.size() != obs_.node_count()) {
        throw std::invalid_argument("BottleneckEnv::step: expected " + std::to_string(obs_.node_count()) +
                                    " actions, got " + std::to_string(actions.size()));
    }
    CavCommands commands;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        commands[obs_.cav_ids[i]] = actions[i];
    }
    return advance(commands);
}

StepOutcome BottleneckEnv::step_rule_based() {
    if (done_) {
        throw std::logic_error("BottleneckEnv::step_rule_based: episode is done, call reset()");
    }
    return advance({});
}

StepOutcome BottleneckEnv::advance(const CavCommands& commands) {
    StepOutcome out;
    out.info.seconds = 0;
    const int exited_before = state_.exited_count;
    const double first_drop = scenario_.corridor.first_drop();
    bool first = true;
    while (true) {
        advance_second(first ? commands : CavCommands{});
        first = false;
        ++elapsed_;
        ++out.info.seconds;
        out.info.r1 += throughput_reward(state_.exit_log, state_.time, reward_);
        out.info.r2 += variance_penalty(state_, first_drop, reward_);
        done_ = horizon_reached();
        if (done_ || state_.cav_count() > 0) {
            break;
        }
    }
    out.reward = out.info.r1 + out.info.r2;
    out.done = done_;
    out.info.exited = state_.exited_count - exited_before;
    double speed_sum = 0.0;
    for (const auto& v : state_.vehicles) {
        speed_sum += v.speed;
        if (v.position < first_drop) {
            ++out.info.n_upstream;
        }
    }
    out.info.mean_speed = state_.vehicles.empty() ? 0.0 : speed_sum / static_cast<double>(state_.vehicles.size());
    obs_ = state_.cav_count() > 0 ? observe(state_, obs_cfg_) : GraphObservation{};
    out.obs = obs_;
    return out;
}

void BottleneckEnv::advance_second(const CavCommands& commands) {
    CavCommands live;
    for (int s = 0; s < sim_.substeps_per_step; ++s) {
        spawn_inflow(state_, scenario_, sim_);
        live.clear();
        for (const auto& [id, a] : commands) {
            if (state_.find(id) != nullptr) {
                live.emplace(id, a);
            }
        }
        const bool last = s + 1 == sim_.substeps_per_step;
        lanedrop::step(state_, scenario_.corridor, sim_, live, sim_.substep, last);
    }
    if (recording_) {
        record();
    }
}

void BottleneckEnv::record() {
    for (const auto& v : state_.vehicles) {
        trajectory_.push_back({state_.time, v.id, v.kind, v.lane, v.position, v.speed});
    }
}

bool BottleneckEnv::horizon_reached() const {
    if (elapsed_ >= scenario_.horizon_steps) {
        return true;
    }
    return scenario_.horizon == HorizonKind::until_empty && state_.exited_count == scenario_.total_vehicles;
}

} // namespace lanedrop
