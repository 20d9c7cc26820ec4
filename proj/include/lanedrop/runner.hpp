#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "lanedrop/config.hpp"
#include "lanedrop/ddpg.hpp"
#include "lanedrop/metrics.hpp"

namespace lanedrop {

struct EpisodeResult {
    EpisodeMetrics metrics;
    std::vector<TrajectoryRow> trajectory;
};

/// Runs one episode. `policy` null means rule-based CAVs; otherwise the
/// policy acts noise-free. Episode i uses seed cfg.seed + i.
EpisodeResult run_episode(const RunConfig& cfg, const ActorParams* policy, int episode_index,
                          bool keep_trajectory = false);

std::vector<EpisodeMetrics> run_episodes(const RunConfig& cfg, const ActorParams* policy, int episodes);

struct TrainHooks {
    std::ostream* step_log = nullptr;    // step,episode,reward,critic_loss,actor_objective
    std::ostream* episode_log = nullptr; // episode,steps,reward,throughput
    /// Called after every checkpoint_every-th episode with the episode count.
    std::function<void(int, const DdpgAgent&)> on_checkpoint;
    std::function<void(int, double)> on_episode; // progress reporting
};

struct TrainResult {
    std::unique_ptr<DdpgAgent> agent;
    std::vector<double> episode_rewards;
    std::int64_t steps = 0;
    int episodes = 0;
};

/// DDPG training loop: warm-up with uniform random actions and no updates,
/// then one minibatch update per decision step.
TrainResult train_agent(const RunConfig& cfg, const TrainHooks& hooks = {});

nlohmann::json metrics_to_json(const std::vector<EpisodeMetrics>& metrics);
std::vector<EpisodeMetrics> metrics_from_json(const nlohmann::json& doc);

/// Per-episode pairs and summary deltas (eval minus baseline). Throws
/// ConfigError when the two sets come from different scenarios.
nlohmann::json compare_report(const std::vector<EpisodeMetrics>& baseline, const std::vector<EpisodeMetrics>& eval);
void write_compare_csv(std::ostream& out, const std::vector<EpisodeMetrics>& baseline,
                       const std::vector<EpisodeMetrics>& eval);

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);
std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in);

// Command implementations. Each writes its artifacts under cfg.output_dir
// along with manifest.json.
void cmd_train(const RunConfig& cfg, std::ostream& progress);
std::vector<EpisodeMetrics> cmd_baseline(const RunConfig& cfg, std::ostream& progress);
std::vector<EpisodeMetrics> cmd_eval(const RunConfig& cfg, std::ostream& progress);
nlohmann::json cmd_compare(const RunConfig& cfg, const std::optional<std::filesystem::path>& baseline_metrics,
                           const std::optional<std::filesystem::path>& eval_metrics, std::ostream& progress);
void cmd_render(const RunConfig& cfg, const std::optional<std::filesystem::path>& trajectory, std::ostream& progress);

/// Loads the actor tensors of a checkpoint into a fresh actor.
ActorParams load_policy(const std::filesystem::path& checkpoint);

} // namespace lanedrop
