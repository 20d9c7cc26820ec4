#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "lanedrop/obs_graph.hpp"
#include "lanedrop/scenario.hpp"
#include "lanedrop/sim.hpp"
#include "lanedrop/tensor.hpp"

namespace lanedrop::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (double& x : m.data()) {
        x = dist(rng);
    }
    return m;
}

/// Observation with random features in [-1, 1] over a complete graph.
inline GraphObservation random_observation(std::size_t n, std::mt19937_64& rng) {
    GraphObservation obs;
    obs.features = random_matrix(n, kNodeFeatureDim, rng);
    obs.adjacency = build_adjacency(n);
    for (std::size_t i = 0; i < n; ++i) {
        obs.cav_ids.push_back(static_cast<int>(10 * i + 3));
    }
    return obs;
}

inline std::vector<double> random_actions(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-2.5, 2.5);
    std::vector<double> a(n);
    for (double& x : a) {
        x = dist(rng);
    }
    return a;
}

/// Triple-loop product used as an independent oracle.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                s += a(i, k) * b(k, j);
            }
            out(i, j) = s;
        }
    }
    return out;
}

/// D^-1/2 (A + I) D^-1/2 built entry by entry from degree sums.
inline Matrix naive_normalize(const Matrix& a) {
    const std::size_t n = a.rows();
    Matrix hat = a;
    for (std::size_t i = 0; i < n; ++i) {
        hat(i, i) += 1.0;
    }
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            deg[i] += hat(i, j);
        }
    }
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out(i, j) = hat(i, j) / std::sqrt(deg[i] * deg[j]);
        }
    }
    return out;
}

inline VehicleState make_vehicle(int id, VehicleKind kind, int lane, double position, double speed) {
    VehicleState v;
    v.id = id;
    v.kind = kind;
    v.lane = lane;
    v.position = position;
    v.speed = speed;
    return v;
}

/// Single-lane straight corridor without drops.
inline CorridorSpec straight_corridor(double length, int lanes = 1) {
    CorridorSpec c;
    c.total_length = length;
    c.segments = {{0.0, lanes}};
    return c;
}

} // namespace lanedrop::testing
