#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lanedrop/obs_graph.hpp"
#include "lanedrop/scenario.hpp"
#include "lanedrop/sim.hpp"

namespace lanedrop {

struct RewardConfig {
    double beta = 10.0;     // speed-variance penalty weight
    double window_t = 10.0; // s, throughput window

    void validate() const;
};

/// 3600 * (exits with time in (now - T, now]) / T, in veh/h. `exit_log`
/// must be sorted ascending.
double throughput_reward(std::span<const double> exit_log, double now, const RewardConfig& cfg);

/// -beta * var / n over vehicles upstream of `first_drop` (population
/// variance); 0 when no vehicle is upstream.
double variance_penalty(const SimState& state, double first_drop, const RewardConfig& cfg);

struct TrajectoryRow {
    double time = 0.0;
    int id = 0;
    VehicleKind kind = VehicleKind::hdv;
    int lane = 0;
    double position = 0.0;
    double speed = 0.0;
};

struct StepInfo {
    double r1 = 0.0;
    double r2 = 0.0;
    int exited = 0;
    double mean_speed = 0.0; // m/s over all vehicles in the corridor
    int n_upstream = 0;
    int seconds = 1; // decision-free seconds are folded into the step
};

struct StepOutcome {
    GraphObservation obs; // empty only when done and no CAV remains
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

/// One-second decision environment over the bottleneck simulator.
///
/// Each step holds the commanded CAV accelerations for `substeps_per_step`
/// substeps, evaluates lane changes at the end of the second, and returns
/// R = r1 + r2. Seconds in which no CAV is in the corridor are simulated
/// within the same step (their rewards are summed) so that every returned
/// non-terminal observation has at least one node.
class BottleneckEnv {
public:
    BottleneckEnv(ScenarioSpec scenario, SimParams sim, ObsConfig obs, RewardConfig reward);

    GraphObservation reset(std::uint64_t seed);
    /// Learned control: one acceleration per CAV in the current observation.
    StepOutcome step(std::span<const double> actions);
    /// Rule-based control: CAVs follow IDM like HDVs.
    StepOutcome step_rule_based();

    bool done() const noexcept { return done_; }
    int elapsed_steps() const noexcept { return elapsed_; }
    const SimState& state() const noexcept { return state_; }
    const ScenarioSpec& scenario() const noexcept { return scenario_; }
    const GraphObservation& observation() const noexcept { return obs_; }

    void set_recording(bool on) { recording_ = on; }
    const std::vector<TrajectoryRow>& trajectory() const noexcept { return trajectory_; }

private:
    StepOutcome advance(const CavCommands& commands);
    void advance_second(const CavCommands& commands);
    void record();
    bool horizon_reached() const;

    ScenarioSpec scenario_;
    SimParams sim_;
    ObsConfig obs_cfg_;
    RewardConfig reward_;
    SimState state_;
    GraphObservation obs_;
    int elapsed_ = 0;
    bool done_ = true;
    bool recording_ = false;
    std::vector<TrajectoryRow> trajectory_;
};

} // namespace lanedrop
