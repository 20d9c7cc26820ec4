#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lanedrop {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct LaneSegment {
    double start = 0.0; // m
    int lane_count = 1;
};

/// Multi-lane corridor with lane drops. Lane 0 is the leftmost lane; drops
/// always remove the rightmost lanes.
struct CorridorSpec {
    double total_length = 0.0; // m
    std::vector<LaneSegment> segments;
    double speed_limit = 30.0; // m/s

    /// Lane count at longitudinal position x (clamped into the corridor).
    int lanes_at(double x) const;
    int max_lanes() const;
    /// First position at which `lane` no longer exists, or +inf.
    double lane_end(int lane) const;
    /// Position of the first lane drop, or total_length if there is none.
    double first_drop() const;

    void validate() const;
};

enum class HorizonKind { until_empty, fixed };

struct ScenarioSpec {
    std::string name;
    CorridorSpec corridor;
    double inflow_rate = 0.0; // veh/h
    int total_vehicles = 0;
    int cav_count = 0;
    /// until_empty: episode ends when every vehicle has exited, or at
    /// horizon_steps as a safety cap. fixed: always horizon_steps.
    HorizonKind horizon = HorizonKind::until_empty;
    int horizon_steps = 0;

    double penetration() const;
    /// Every cav_interval()-th spawned vehicle is a CAV (0 when there are none).
    int cav_interval() const;
    double spawn_headway() const { return 3600.0 / inflow_rate; }

    void validate() const;
};

/// 0.5 km, 4 lanes dropping to 3 at 300 m and to 2 at 400 m; 1500 veh/h;
/// 50 vehicles of which 5 CAVs; runs until empty with a 2000-step cap.
ScenarioSpec moderate_scenario();

/// 1 km, 4 lanes to 600 m, 2 lanes to 800 m, 1 lane to the end; 2300 veh/h;
/// 140 vehicles of which 10 CAVs; fixed 1500-step horizon.
ScenarioSpec severe_scenario();

ScenarioSpec scenario_by_name(const std::string& name);

} // namespace lanedrop
