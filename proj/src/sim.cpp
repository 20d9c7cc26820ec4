#include "lanedrop/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lanedrop {

void IdmParams::validate(const std::string& prefix) const {
    auto positive = [&](double v, const char* field) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(prefix + "." + field + " must be a positive number");
        }
    };
    positive(a_max, "a_max");
    positive(b_comfort, "b_comfort");
    positive(v0, "v0");
    positive(s0, "s0");
    positive(t_headway, "t_headway");
    if (!(delta >= 1.0)) {
        throw ConfigError(prefix + ".delta must be >= 1");
    }
}

void LaneChangeParams::validate(const std::string& prefix) const {
    auto positive = [&](double v, const char* field) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(prefix + "." + field + " must be a positive number");
        }
    };
    positive(safe_decel, "safe_decel");
    positive(incentive_threshold, "incentive_threshold");
    positive(mandatory_lookahead, "mandatory_lookahead");
    positive(cooldown, "cooldown");
}

void SimParams::validate() const {
    idm.validate("sim.idm");
    lane_change.validate("sim.lane_change");
    if (!(vehicle_length > 0.0)) {
        throw ConfigError("sim.vehicle_length must be positive");
    }
    if (!(emergency_decel >= idm.b_comfort)) {
        throw ConfigError("sim.emergency_decel must be >= sim.idm.b_comfort");
    }
    if (!(substep > 0.0)) {
        throw ConfigError("sim.substep must be positive");
    }
    if (substeps_per_step < 1) {
        throw ConfigError("sim.substeps_per_step must be >= 1");
    }
    if (!(guard_margin >= 0.0)) {
        throw ConfigError("sim.guard_margin must be >= 0");
    }
}

const VehicleState* SimState::find(int id) const {
    auto it = std::lower_bound(vehicles.begin(), vehicles.end(), id,
                               [](const VehicleState& v, int key) { return v.id < key; });
    return it != vehicles.end() && it->id == id ? &*it : nullptr;
}

VehicleState* SimState::find(int id) {
    return const_cast<VehicleState*>(std::as_const(*this).find(id));
}

int SimState::cav_count() const {
    return static_cast<int>(std::count_if(vehicles.begin(), vehicles.end(),
                                          [](const VehicleState& v) { return v.is_cav(); }));
}

double desired_gap(double v, double dv, const IdmParams& idm) {
    const double s = idm.s0 + v * idm.t_headway + v * dv / (2.0 * std::sqrt(idm.a_max * idm.b_comfort));
    return std::max(0.0, s);
}

double idm_acceleration(double v, double gap, double leader_speed, const IdmParams& idm, double emergency_decel) {
    double interaction = 0.0;
    if (std::isfinite(gap)) {
        if (!(gap > 0.0)) {
            std::ostringstream msg;
            msg << "idm_acceleration: non-positive gap " << gap << " to leader (collision state)";
            throw SimulationError(msg.str());
        }
        const double ratio = desired_gap(v, v - leader_speed, idm) / gap;
        interaction = ratio * ratio;
    }
    const double free_term = std::pow(v / idm.v0, idm.delta);
    const double a = idm.a_max * (1.0 - free_term - interaction);
    return std::clamp(a, -emergency_decel, idm.a_max);
}

double safe_entry_speed(double gap, double leader_speed, const IdmParams& idm, double speed_limit) {
    if (!std::isfinite(gap)) {
        return speed_limit;
    }
    if (gap <= idm.s0) {
        return 0.0;
    }
    // s0 + v*T + v*(v - vl)/(2 sqrt(ab)) = gap, positive root
    const double k = 1.0 / (2.0 * std::sqrt(idm.a_max * idm.b_comfort));
    const double c2 = k;
    const double c1 = idm.t_headway - leader_speed * k;
    const double c0 = idm.s0 - gap;
    const double v = (-c1 + std::sqrt(c1 * c1 - 4.0 * c2 * c0)) / (2.0 * c2);
    return std::clamp(v, 0.0, speed_limit);
}

LeadInfo lead_ahead(const SimState& state, const CorridorSpec& corridor, int lane, double position,
                    int exclude_id) {
    LeadInfo lead;
    const VehicleState* best = nullptr;
    for (const auto& v : state.vehicles) {
        if (v.lane != lane || v.id == exclude_id || v.position < position) {
            continue;
        }
        if (best == nullptr || v.position < best->position) {
            best = &v;
        }
    }
    if (best != nullptr) {
        lead.gap = best->rear() - position;
        lead.speed = best->speed;
        lead.vehicle = best;
    }
    const double end = corridor.lane_end(lane);
    if (std::isfinite(end) && end - position < lead.gap) {
        lead.gap = end - position;
        lead.speed = 0.0;
        lead.vehicle = nullptr;
    }
    return lead;
}

const VehicleState* follower_behind(const SimState& state, int lane, double position, int exclude_id) {
    const VehicleState* best = nullptr;
    for (const auto& v : state.vehicles) {
        if (v.lane != lane || v.id == exclude_id || v.position > position) {
            continue;
        }
        if (best == nullptr || v.position > best->position) {
            best = &v;
        }
    }
    return best;
}

namespace {

struct LaneOption {
    int lane = 0;
    double own_accel = 0.0;
    double lead_gap = 0.0;
    bool safe = false;
};

LaneOption evaluate_target(const VehicleState& veh, int target, const SimState& state,
                           const CorridorSpec& corridor, const SimParams& params) {
    LaneOption opt;
    opt.lane = target;
    const LeadInfo lead = lead_ahead(state, corridor, target, veh.position, veh.id);
    opt.lead_gap = lead.gap;
    if (!(lead.gap > 0.0)) {
        return opt;
    }
    opt.own_accel = idm_acceleration(veh.speed, lead.gap, lead.speed, veh.idm, params.emergency_decel);
    const double limit = -params.lane_change.safe_decel;
    if (opt.own_accel < limit) {
        return opt;
    }
    if (const VehicleState* fol = follower_behind(state, target, veh.position, veh.id)) {
        const double fol_gap = veh.rear() - fol->position;
        if (!(fol_gap > 0.0)) {
            return opt;
        }
        const double induced = idm_acceleration(fol->speed, fol_gap, veh.speed, fol->idm, params.emergency_decel);
        if (induced < limit) {
            return opt;
        }
    }
    opt.safe = true;
    return opt;
}

} // namespace

std::optional<int> lane_change_decision(int vehicle_id, const SimState& state, const CorridorSpec& corridor,
                                        const SimParams& params) {
    const VehicleState* veh = state.find(vehicle_id);
    if (veh == nullptr) {
        throw std::invalid_argument("lane_change_decision: unknown vehicle id " + std::to_string(vehicle_id));
    }
    const LaneChangeParams& lc = params.lane_change;
    if (state.time - veh->last_lane_change < lc.cooldown) {
        return std::nullopt;
    }
    const int lanes_here = corridor.lanes_at(veh->position);
    const double own_end = corridor.lane_end(veh->lane);
    const bool mandatory = own_end - veh->position <= lc.mandatory_lookahead;

    std::vector<LaneOption> options;
    for (int target : {veh->lane - 1, veh->lane + 1}) {
        if (target < 0 || target >= lanes_here) {
            continue;
        }
        const double target_end = corridor.lane_end(target);
        // Drops remove the rightmost lanes, so only the left neighbor leads
        // toward a surviving lane.
        if (mandatory ? !(target < veh->lane && target_end >= own_end)
                      : !(target_end - veh->position > lc.mandatory_lookahead)) {
            continue;
        }
        LaneOption opt = evaluate_target(*veh, target, state, corridor, params);
        if (opt.safe) {
            options.push_back(opt);
        }
    }
    if (options.empty()) {
        return std::nullopt;
    }

    if (mandatory) {
        std::stable_sort(options.begin(), options.end(), [&](const LaneOption& a, const LaneOption& b) {
            const bool a_left = a.lane < veh->lane;
            const bool b_left = b.lane < veh->lane;
            if (a_left != b_left) {
                return a_left;
            }
            return a.lead_gap > b.lead_gap;
        });
        return options.front().lane;
    }

    const LeadInfo cur = lead_ahead(state, corridor, veh->lane, veh->position, veh->id);
    const double current_accel = idm_acceleration(veh->speed, cur.gap, cur.speed, veh->idm, params.emergency_decel);
    std::optional<int> best;
    double best_gain = lc.incentive_threshold;
    for (const auto& opt : options) {
        const double gain = opt.own_accel - current_accel;
        if (gain > best_gain || (gain == best_gain && !best)) {
            best_gain = gain;
            best = opt.lane;
        }
    }
    return best;
}

std::vector<int> spawn_inflow(SimState& state, const ScenarioSpec& scenario, const SimParams& params) {
    std::vector<int> spawned;
    const CorridorSpec& corridor = scenario.corridor;
    const int entry_lanes = corridor.lanes_at(0.0);
    const int interval = scenario.cav_interval();
    while (state.spawned_count < scenario.total_vehicles && state.time + 1e-9 >= state.next_spawn_time) {
        int chosen = -1;
        LeadInfo chosen_lead;
        for (int k = 0; k < entry_lanes; ++k) {
            const int lane = (state.next_entry_lane + k) % entry_lanes;
            const LeadInfo lead = lead_ahead(state, corridor, lane, 0.0);
            if (lead.gap > params.idm.s0) {
                chosen = lane;
                chosen_lead = lead;
                break;
            }
        }
        if (chosen < 0) {
            break; // deferred; retried next substep
        }
        VehicleState v;
        v.id = state.spawned_count;
        const bool is_cav = interval > 0 && (state.spawned_count + 1) % interval == 0;
        v.kind = is_cav ? VehicleKind::cav : VehicleKind::hdv;
        v.lane = chosen;
        v.position = 0.0;
        v.length = params.vehicle_length;
        v.idm = params.idm;
        v.speed = safe_entry_speed(chosen_lead.gap, chosen_lead.speed, v.idm, corridor.speed_limit);
        state.vehicles.push_back(v);
        spawned.push_back(v.id);
        ++state.spawned_count;
        state.next_entry_lane = (chosen + 1) % entry_lanes;
        state.next_spawn_time += scenario.spawn_headway();
    }
    return spawned;
}

namespace {

// Per-lane vehicle indices, front (largest position) first.
std::vector<std::vector<std::size_t>> lane_order(const SimState& state, int lane_count) {
    std::vector<std::vector<std::size_t>> lanes(static_cast<std::size_t>(lane_count));
    for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
        const int lane = state.vehicles[i].lane;
        if (lane < 0 || lane >= lane_count) {
            throw SimulationError("vehicle " + std::to_string(state.vehicles[i].id) + " on invalid lane " +
                                  std::to_string(lane));
        }
        lanes[static_cast<std::size_t>(lane)].push_back(i);
    }
    for (auto& idx : lanes) {
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return state.vehicles[a].position > state.vehicles[b].position;
        });
    }
    return lanes;
}

} // namespace

int step(SimState& state, const CorridorSpec& corridor, const SimParams& params, const CavCommands& cav_accels,
         double dt, bool apply_lane_changes) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("step: dt must be positive");
    }
    for (const auto& [id, a] : cav_accels) {
        const VehicleState* v = state.find(id);
        if (v == nullptr || !v->is_cav()) {
            throw std::invalid_argument("step: command for non-CAV or unknown vehicle " + std::to_string(id));
        }
        if (!(a >= -kActionBound && a <= kActionBound)) {
            throw std::invalid_argument("step: commanded acceleration out of [-3, 3] for vehicle " +
                                        std::to_string(id));
        }
    }

    const auto lanes = lane_order(state, corridor.max_lanes());
    const std::size_t n = state.vehicles.size();
    std::vector<double> next_speed(n), next_pos(n), accel(n);
    const double b = params.emergency_decel;

    for (std::size_t lane = 0; lane < lanes.size(); ++lane) {
        const double end = corridor.lane_end(static_cast<int>(lane));
        const auto& order = lanes[lane];
        for (std::size_t k = 0; k < order.size(); ++k) {
            const std::size_t i = order[k];
            const VehicleState& v = state.vehicles[i];

            // Nearest obstruction: the vehicle ahead or the lane end.
            double gap = kFreeRoad;
            double lead_speed = 0.0;
            double lead_next_rear = kFreeRoad;
            double lead_next_speed = 0.0;
            if (k > 0) {
                const std::size_t j = order[k - 1];
                const VehicleState& lead = state.vehicles[j];
                gap = lead.rear() - v.position;
                lead_speed = lead.speed;
                lead_next_rear = next_pos[j] - lead.length;
                lead_next_speed = next_speed[j];
            }
            if (std::isfinite(end) && end - v.position < gap) {
                gap = end - v.position;
                lead_speed = 0.0;
                lead_next_rear = end;
                lead_next_speed = 0.0;
            }

            const auto cmd = v.is_cav() ? cav_accels.find(v.id) : cav_accels.end();
            double a = 0.0;
            double v_next = 0.0;
            if (cmd == cav_accels.end()) {
                a = idm_acceleration(v.speed, gap, lead_speed, v.idm, b);
                v_next = std::max(0.0, v.speed + a * dt);
            } else {
                a = cmd->second;
                v_next = std::clamp(v.speed + a * dt, 0.0, corridor.speed_limit);
                if (std::isfinite(lead_next_rear)) {
                    // Must still be able to stop behind a leader braking at b.
                    const double gap_next = lead_next_rear - (v.position + v_next * dt);
                    const double slack =
                        gap_next + (lead_next_speed * lead_next_speed - v_next * v_next) / (2.0 * b);
                    if (slack < params.guard_margin) {
                        a = -b;
                        v_next = std::max(0.0, v.speed + a * dt);
                    }
                }
            }
            accel[i] = a;
            next_speed[i] = v_next;
            next_pos[i] = v.position + v_next * dt;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        auto& v = state.vehicles[i];
        v.accel = accel[i];
        v.speed = next_speed[i];
        v.position = next_pos[i];
    }
    ++state.tick;
    state.time = static_cast<double>(state.tick) * dt;

    int exited = 0;
    auto gone = std::remove_if(state.vehicles.begin(), state.vehicles.end(), [&](const VehicleState& v) {
        if (v.position >= corridor.total_length) {
            state.exit_log.push_back(state.time);
            ++exited;
            return true;
        }
        return false;
    });
    state.vehicles.erase(gone, state.vehicles.end());
    state.exited_count += exited;

    if (apply_lane_changes) {
        std::vector<std::size_t> order(state.vehicles.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
            return state.vehicles[a].position > state.vehicles[c].position;
        });
        for (std::size_t i : order) {
            auto& v = state.vehicles[i];
            if (auto target = lane_change_decision(v.id, state, corridor, params)) {
                v.lane = *target;
                v.last_lane_change = state.time;
            }
        }
    }

    check_invariants(state, corridor);
    return exited;
}

void check_invariants(const SimState& state, const CorridorSpec& corridor) {
    const int lane_count = corridor.max_lanes();
    const auto lanes = lane_order(state, lane_count);
    for (const auto& v : state.vehicles) {
        if (!(v.speed >= 0.0) || !std::isfinite(v.position)) {
            throw SimulationError("vehicle " + std::to_string(v.id) + " has an invalid kinematic state");
        }
        if (v.lane >= corridor.lanes_at(v.position)) {
            std::ostringstream msg;
            msg << "vehicle " << v.id << " on lane " << v.lane << " past its lane end at " << v.position << " m";
            throw SimulationError(msg.str());
        }
    }
    for (std::size_t lane = 0; lane < lanes.size(); ++lane) {
        const auto& order = lanes[lane];
        for (std::size_t k = 1; k < order.size(); ++k) {
            const VehicleState& lead = state.vehicles[order[k - 1]];
            const VehicleState& fol = state.vehicles[order[k]];
            if (!(lead.position > fol.position) || lead.rear() - fol.position < 0.0) {
                std::ostringstream msg;
                msg << "overlap on lane " << lane << ": vehicle " << fol.id << " at " << fol.position
                    << " m behind vehicle " << lead.id << " at " << lead.position << " m (t=" << state.time << ")";
                throw SimulationError(msg.str());
            }
        }
    }
    if (state.spawned_count != static_cast<int>(state.vehicles.size()) + state.exited_count) {
        throw SimulationError("vehicle conservation violated");
    }
}

} // namespace lanedrop
