#include "lanedrop/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lanedrop {

int CorridorSpec::lanes_at(double x) const {
    int lanes = segments.empty() ? 0 : segments.front().lane_count;
    for (const auto& seg : segments) {
        if (seg.start <= x) {
            lanes = seg.lane_count;
        } else {
            break;
        }
    }
    return lanes;
}

int CorridorSpec::max_lanes() const {
    int best = 0;
    for (const auto& seg : segments) {
        best = std::max(best, seg.lane_count);
    }
    return best;
}

double CorridorSpec::lane_end(int lane) const {
    for (const auto& seg : segments) {
        if (seg.lane_count <= lane) {
            return seg.start;
        }
    }
    return std::numeric_limits<double>::infinity();
}

double CorridorSpec::first_drop() const {
    for (std::size_t i = 1; i < segments.size(); ++i) {
        if (segments[i].lane_count < segments[i - 1].lane_count) {
            return segments[i].start;
        }
    }
    return total_length;
}

void CorridorSpec::validate() const {
    if (!(total_length > 0.0)) {
        throw ConfigError("corridor.total_length must be positive");
    }
    if (!(speed_limit > 0.0)) {
        throw ConfigError("corridor.speed_limit must be positive");
    }
    if (segments.empty() || segments.front().start != 0.0) {
        throw ConfigError("corridor.segments must start at position 0");
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i].lane_count < 1) {
            throw ConfigError("corridor.segments[" + std::to_string(i) + "].lane_count must be >= 1");
        }
        if (segments[i].start >= total_length) {
            throw ConfigError("corridor.segments[" + std::to_string(i) + "] starts beyond the corridor end");
        }
        if (i > 0 && !(segments[i].start > segments[i - 1].start)) {
            throw ConfigError("corridor.segments must be strictly increasing in start position");
        }
        if (i > 0 && segments[i].lane_count > segments[i - 1].lane_count) {
            throw ConfigError("corridor.segments lane counts must be non-increasing downstream");
        }
    }
}

double ScenarioSpec::penetration() const {
    return total_vehicles == 0 ? 0.0 : static_cast<double>(cav_count) / total_vehicles;
}

int ScenarioSpec::cav_interval() const {
    if (cav_count <= 0) {
        return 0;
    }
    return static_cast<int>(std::lround(1.0 / penetration()));
}

void ScenarioSpec::validate() const {
    corridor.validate();
    if (!(inflow_rate > 0.0)) {
        throw ConfigError("scenario.inflow_rate must be positive");
    }
    if (total_vehicles < 1) {
        throw ConfigError("scenario.total_vehicles must be >= 1");
    }
    if (cav_count < 0 || cav_count > total_vehicles) {
        throw ConfigError("scenario.cav_count must be in [0, total_vehicles]");
    }
    if (cav_count > 0 && total_vehicles / cav_interval() != cav_count) {
        throw ConfigError("scenario.cav_count is not reachable with every-k-th CAV insertion");
    }
    if (horizon_steps < 1) {
        throw ConfigError("scenario.horizon_steps must be >= 1");
    }
}

ScenarioSpec moderate_scenario() {
    ScenarioSpec s;
    s.name = "moderate";
    s.corridor.total_length = 500.0;
    s.corridor.segments = {{0.0, 4}, {300.0, 3}, {400.0, 2}};
    s.corridor.speed_limit = 30.0;
    s.inflow_rate = 1500.0;
    s.total_vehicles = 50;
    s.cav_count = 5;
    s.horizon = HorizonKind::until_empty;
    s.horizon_steps = 2000;
    return s;
}

ScenarioSpec severe_scenario() {
    ScenarioSpec s;
    s.name = "severe";
    s.corridor.total_length = 1000.0;
    s.corridor.segments = {{0.0, 4}, {600.0, 2}, {800.0, 1}};
    s.corridor.speed_limit = 30.0;
    s.inflow_rate = 2300.0;
    s.total_vehicles = 140;
    s.cav_count = 10;
    s.horizon = HorizonKind::fixed;
    s.horizon_steps = 1500;
    return s;
}

ScenarioSpec scenario_by_name(const std::string& name) {
    if (name == "moderate") {
        return moderate_scenario();
    }
    if (name == "severe") {
        return severe_scenario();
    }
    throw ConfigError("unknown scenario '" + name + "' (expected moderate or severe)");
}

} // namespace lanedrop
