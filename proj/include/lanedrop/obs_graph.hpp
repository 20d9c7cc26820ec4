#pragma once

#include <span>
#include <vector>

#include "lanedrop/sim.hpp"
#include "lanedrop/tensor.hpp"

namespace lanedrop {

inline constexpr std::size_t kNodeFeatureDim = 6;

struct ObsConfig {
    double rho = 100.0;         // sensing radius, m
    double pos_scale = 500.0;   // m, corridor length
    double speed_scale = 30.0;  // m/s, speed limit
    double max_sensed = 20.0;   // HDV-count normalizer
    int max_lanes = 4;

    static ObsConfig for_scenario(const ScenarioSpec& scenario, double rho = 100.0, double max_sensed = 20.0);
    void validate() const;
};

/// RL state: one row of node features per CAV plus the binary adjacency.
struct GraphObservation {
    Matrix features;  // N x kNodeFeatureDim
    Matrix adjacency; // N x N, binary, zero diagonal
    std::vector<int> cav_ids;

    std::size_t node_count() const noexcept { return cav_ids.size(); }
};

struct SensedVehicle {
    double relative_position; // m, HDV minus CAV
    double speed;             // m/s
};

/// HDVs within longitudinal distance rho of the CAV (closed ball, all
/// lanes), sorted by relative position.
std::vector<SensedVehicle> sense(int cav_id, const SimState& state, const ObsConfig& cfg);

/// CAV ids present in the state, ascending.
std::vector<int> cav_ids(const SimState& state);

/// Features for the given CAVs in the given order. Row layout:
///   [p / pos_scale, v / speed_scale, lane / (max_lanes - 1),
///    min(1, n_sensed / max_sensed), mean relative position / rho,
///    mean sensed speed / speed_scale]
Matrix build_features(const SimState& state, const ObsConfig& cfg, std::span<const int> ids);
Matrix build_features(const SimState& state, const ObsConfig& cfg);

/// Complete graph on n nodes without self loops.
Matrix build_adjacency(std::size_t n_cavs);

/// D^-1/2 (A + I) D^-1/2 where D is the degree matrix of A + I.
Matrix normalize_adjacency(const Matrix& adjacency);

GraphObservation observe(const SimState& state, const ObsConfig& cfg);

} // namespace lanedrop
