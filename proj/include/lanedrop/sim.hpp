#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "lanedrop/scenario.hpp"

namespace lanedrop {

/// Thrown when the simulator detects a broken physical invariant (overlap,
/// vehicle on a lane that no longer exists). Never recovered from.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kFreeRoad = std::numeric_limits<double>::infinity();
inline constexpr double kActionBound = 3.0; // m/s^2

struct IdmParams {
    double a_max = 1.0;     // m/s^2
    double b_comfort = 1.5; // m/s^2
    double v0 = 30.0;       // m/s
    double delta = 4.0;
    double s0 = 2.0;        // m
    double t_headway = 1.0; // s

    void validate(const std::string& prefix = "idm") const;
};

struct LaneChangeParams {
    double safe_decel = 4.0;           // m/s^2, worst braking a change may impose
    double incentive_threshold = 0.2;  // m/s^2
    double mandatory_lookahead = 100.0; // m
    double cooldown = 2.0;             // s

    void validate(const std::string& prefix = "lane_change") const;
};

enum class VehicleKind { cav, hdv };

struct VehicleState {
    int id = 0;
    VehicleKind kind = VehicleKind::hdv;
    int lane = 0;
    double position = 0.0; // front bumper, m
    double speed = 0.0;    // m/s
    double accel = 0.0;    // m/s^2, last applied
    double length = 5.0;   // m
    IdmParams idm;
    double last_lane_change = -std::numeric_limits<double>::infinity();

    double rear() const noexcept { return position - length; }
    bool is_cav() const noexcept { return kind == VehicleKind::cav; }
};

struct SimParams {
    IdmParams idm;
    LaneChangeParams lane_change;
    double vehicle_length = 5.0;   // m
    double emergency_decel = 6.0;  // m/s^2, hard-brake bound
    double substep = 0.1;          // s
    int substeps_per_step = 10;    // substeps per 1 s decision step
    double guard_margin = 1.0;     // m, CAV emergency-brake guard clearance

    void validate() const;
};

struct SimState {
    std::int64_t tick = 0;
    double time = 0.0; // s, tick * substep
    std::vector<VehicleState> vehicles; // ascending id
    int spawned_count = 0;
    int exited_count = 0;
    std::vector<double> exit_log; // exit times, s
    double next_spawn_time = 0.0;
    int next_entry_lane = 0;
    std::mt19937_64 rng;

    explicit SimState(std::uint64_t seed = 0) : rng(seed) {}

    const VehicleState* find(int id) const;
    VehicleState* find(int id);
    int cav_count() const;
};

/// s* = s0 + v*T + v*dv / (2*sqrt(a*b)), clamped at zero.
double desired_gap(double v, double dv, const IdmParams& idm);

/// IDM acceleration, clamped to [-emergency_decel, a_max]. Pass gap =
/// kFreeRoad when there is no leader. A finite gap <= 0 is a collision state
/// and throws SimulationError.
double idm_acceleration(double v, double gap, double leader_speed, const IdmParams& idm,
                        double emergency_decel = 6.0);

/// Largest speed in [0, speed_limit] at which a vehicle entering with
/// `gap` behind a leader at `leader_speed` is at its IDM desired gap.
double safe_entry_speed(double gap, double leader_speed, const IdmParams& idm, double speed_limit);

/// Nearest obstruction ahead of a point on a lane: a vehicle or the lane end.
struct LeadInfo {
    double gap = kFreeRoad;
    double speed = 0.0;
    const VehicleState* vehicle = nullptr; // null for free road or lane end
};

LeadInfo lead_ahead(const SimState& state, const CorridorSpec& corridor, int lane, double position,
                    int exclude_id = -1);

/// Nearest vehicle at or behind `position` on `lane`.
const VehicleState* follower_behind(const SimState& state, int lane, double position, int exclude_id = -1);

/// Rule-based lane change: mandatory merges ahead of a lane drop, otherwise
/// an acceleration-incentive test. Both are gated by a safety test on the
/// new follower and the changing vehicle itself.
std::optional<int> lane_change_decision(int vehicle_id, const SimState& state, const CorridorSpec& corridor,
                                        const SimParams& params);

/// Inserts due vehicles at position 0. Returns the ids of the new vehicles.
std::vector<int> spawn_inflow(SimState& state, const ScenarioSpec& scenario, const SimParams& params);

using CavCommands = std::map<int, double>;

/// Advances the simulation by dt. CAVs listed in `cav_accels` follow their
/// command (behind an emergency-brake guard); everything else follows IDM.
/// Returns the number of vehicles that left the corridor.
int step(SimState& state, const CorridorSpec& corridor, const SimParams& params, const CavCommands& cav_accels,
         double dt, bool apply_lane_changes = true);

/// Throws SimulationError if any lane ordering, gap or lane-existence
/// invariant is broken.
void check_invariants(const SimState& state, const CorridorSpec& corridor);

} // namespace lanedrop
