#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "lanedrop/ddpg.hpp"
#include "lanedrop/env.hpp"
#include "lanedrop/scenario.hpp"
#include "lanedrop/sim.hpp"

namespace lanedrop {

/// Everything needed to reproduce a run. Serialized as one JSON document
/// with a section per component:
///
///   {"scenario": "moderate", "seed": 0, "episodes": 10, "output_dir": "out",
///    "checkpoint": null,
///    "sim":    {"idm": {...}, "lane_change": {...}, "vehicle_length": 5, ...},
///    "obs":    {"rho": 100, "max_sensed": 20},
///    "reward": {"beta": 10, "window_t": 10},
///    "train":  {"discount": 0.99, "tau": 0.001, ...}}
///
/// Missing keys keep their defaults; unknown keys are rejected.
struct RunConfig {
    std::string scenario = "moderate";
    std::string mode = "baseline";
    std::uint64_t seed = 0;
    int episodes = 10;
    std::string output_dir = "out";
    std::optional<std::string> checkpoint;

    SimParams sim;
    double rho = 100.0;
    double max_sensed = 20.0;
    RewardConfig reward;
    TrainConfig train;

    ScenarioSpec scenario_spec() const;
    ObsConfig obs_config() const;

    /// Throws ConfigError with the offending field path.
    void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& doc, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Stable FNV-1a hash of the canonical JSON serialization.
std::string config_hash(const RunConfig& cfg);

} // namespace lanedrop
