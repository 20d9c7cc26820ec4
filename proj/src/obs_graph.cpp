#include "lanedrop/obs_graph.hpp"

#include <algorithm>
#include <cmath>

namespace lanedrop {

ObsConfig ObsConfig::for_scenario(const ScenarioSpec& scenario, double rho, double max_sensed) {
    ObsConfig cfg;
    cfg.rho = rho;
    cfg.pos_scale = scenario.corridor.total_length;
    cfg.speed_scale = scenario.corridor.speed_limit;
    cfg.max_sensed = max_sensed;
    cfg.max_lanes = scenario.corridor.max_lanes();
    return cfg;
}

void ObsConfig::validate() const {
    if (!(rho > 0.0)) {
        throw ConfigError("obs.rho must be positive");
    }
    if (!(pos_scale > 0.0) || !(speed_scale > 0.0) || !(max_sensed > 0.0)) {
        throw ConfigError("obs scales must be positive");
    }
    if (max_lanes < 1) {
        throw ConfigError("obs.max_lanes must be >= 1");
    }
}

std::vector<SensedVehicle> sense(int cav_id, const SimState& state, const ObsConfig& cfg) {
    const VehicleState* cav = state.find(cav_id);
    if (cav == nullptr || !cav->is_cav()) {
        throw std::invalid_argument("sense: " + std::to_string(cav_id) + " is not a CAV in the current state");
    }
    std::vector<SensedVehicle> out;
    for (const auto& v : state.vehicles) {
        if (v.is_cav()) {
            continue;
        }
        const double rel = v.position - cav->position;
        if (std::abs(rel) <= cfg.rho) {
            out.push_back({rel, v.speed});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const SensedVehicle& a, const SensedVehicle& b) {
        return a.relative_position < b.relative_position;
    });
    return out;
}

std::vector<int> cav_ids(const SimState& state) {
    std::vector<int> ids;
    for (const auto& v : state.vehicles) {
        if (v.is_cav()) {
            ids.push_back(v.id);
        }
    }
    return ids;
}

Matrix build_features(const SimState& state, const ObsConfig& cfg, std::span<const int> ids) {
    if (ids.empty()) {
        throw std::invalid_argument("build_features: observation needs at least one CAV");
    }
    Matrix x(ids.size(), kNodeFeatureDim);
    const double lane_norm = cfg.max_lanes > 1 ? static_cast<double>(cfg.max_lanes - 1) : 1.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const VehicleState* cav = state.find(ids[i]);
        if (cav == nullptr || !cav->is_cav()) {
            throw std::invalid_argument("build_features: " + std::to_string(ids[i]) + " is not a CAV");
        }
        const auto sensed = sense(cav->id, state, cfg);
        double mean_rel = 0.0;
        double mean_speed = 0.0;
        for (const auto& s : sensed) {
            mean_rel += s.relative_position;
            mean_speed += s.speed;
        }
        if (!sensed.empty()) {
            mean_rel /= static_cast<double>(sensed.size());
            mean_speed /= static_cast<double>(sensed.size());
        }
        auto row = x.row(i);
        row[0] = cav->position / cfg.pos_scale;
        row[1] = cav->speed / cfg.speed_scale;
        row[2] = static_cast<double>(cav->lane) / lane_norm;
        row[3] = std::min(1.0, static_cast<double>(sensed.size()) / cfg.max_sensed);
        row[4] = mean_rel / cfg.rho;
        row[5] = mean_speed / cfg.speed_scale;
    }
    x.check_finite("build_features");
    return x;
}

Matrix build_features(const SimState& state, const ObsConfig& cfg) {
    const auto ids = cav_ids(state);
    return build_features(state, cfg, ids);
}

Matrix build_adjacency(std::size_t n_cavs) {
    if (n_cavs == 0) {
        throw std::invalid_argument("build_adjacency: need at least one CAV");
    }
    Matrix a(n_cavs, n_cavs, 1.0);
    for (std::size_t i = 0; i < n_cavs; ++i) {
        a(i, i) = 0.0;
    }
    return a;
}

Matrix normalize_adjacency(const Matrix& adjacency) {
    if (adjacency.rows() != adjacency.cols()) {
        throw ShapeError("normalize_adjacency: adjacency must be square");
    }
    const std::size_t n = adjacency.rows();
    std::vector<double> inv_sqrt_degree(n);
    for (std::size_t i = 0; i < n; ++i) {
        double degree = 1.0; // self loop
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                degree += adjacency(i, j);
            }
        }
        inv_sqrt_degree[i] = 1.0 / std::sqrt(degree);
    }
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double a_hat = i == j ? 1.0 : adjacency(i, j);
            s(i, j) = inv_sqrt_degree[i] * a_hat * inv_sqrt_degree[j];
        }
    }
    return s;
}

GraphObservation observe(const SimState& state, const ObsConfig& cfg) {
    GraphObservation obs;
    obs.cav_ids = cav_ids(state);
    obs.features = build_features(state, cfg, obs.cav_ids);
    obs.adjacency = build_adjacency(obs.cav_ids.size());
    return obs;
}

} // namespace lanedrop
