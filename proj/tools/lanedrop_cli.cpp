// lanedrop: train, evaluate and compare lane-drop bottleneck controllers.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lanedrop/checkpoint.hpp"
#include "lanedrop/config.hpp"
#include "lanedrop/runner.hpp"
#include "lanedrop/sim.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::string> scenario;
    std::optional<std::uint64_t> seed;
    std::optional<int> episodes;
    std::optional<std::string> checkpoint;
    std::optional<std::string> out;
    std::optional<std::int64_t> total_steps;
    std::optional<int> max_episodes;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--scenario", o.scenario, "moderate or severe");
    cmd->add_option("--seed", o.seed, "base seed; episode i uses seed + i");
    cmd->add_option("--episodes", o.episodes, "number of evaluation episodes");
    cmd->add_option("--checkpoint", o.checkpoint, "policy checkpoint");
    cmd->add_option("--out", o.out, "output directory");
}

lanedrop::RunConfig resolve(const Overrides& o, const std::string& mode) {
    lanedrop::RunConfig cfg = o.config.empty() ? lanedrop::RunConfig{} : lanedrop::load_config(o.config);
    cfg.mode = mode;
    if (o.scenario) cfg.scenario = *o.scenario;
    if (o.seed) cfg.seed = *o.seed;
    if (o.episodes) cfg.episodes = *o.episodes;
    if (o.checkpoint) cfg.checkpoint = *o.checkpoint;
    if (o.out) cfg.output_dir = *o.out;
    if (o.total_steps) cfg.train.total_steps = *o.total_steps;
    if (o.max_episodes) cfg.train.max_episodes = *o.max_episodes;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lane-drop bottleneck simulator with graph-based multi-agent DDPG control"};
    app.set_version_flag("--version", std::string(LANEDROP_VERSION));
    app.require_subcommand(1);

    Overrides o;
    std::optional<std::string> baseline_metrics;
    std::optional<std::string> eval_metrics;
    std::optional<std::string> trajectory;

    auto* train = app.add_subcommand("train", "train a controller and write checkpoints");
    add_common(train, o);
    train->add_option("--total-steps", o.total_steps, "training budget in decision steps");
    train->add_option("--max-episodes", o.max_episodes, "stop after this many episodes (0 = no limit)");

    auto* baseline = app.add_subcommand("baseline", "run rule-based episodes");
    add_common(baseline, o);

    auto* eval = app.add_subcommand("eval", "run noise-free policy episodes");
    add_common(eval, o);

    auto* compare = app.add_subcommand("compare", "compare baseline and learned controllers");
    add_common(compare, o);
    compare->add_option("--baseline-metrics", baseline_metrics, "episode_metrics.json from a baseline run")
        ->check(CLI::ExistingFile);
    compare->add_option("--eval-metrics", eval_metrics, "episode_metrics.json from an eval run")
        ->check(CLI::ExistingFile);

    auto* render = app.add_subcommand("render", "write speed grids and heatmaps");
    add_common(render, o);
    render->add_option("--trajectory", trajectory, "trajectory.csv to render instead of a fresh episode")
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            lanedrop::cmd_train(resolve(o, "train"), std::cout);
        } else if (baseline->parsed()) {
            lanedrop::cmd_baseline(resolve(o, "baseline"), std::cout);
        } else if (eval->parsed()) {
            lanedrop::cmd_eval(resolve(o, "eval"), std::cout);
        } else if (compare->parsed()) {
            auto to_path = [](const std::optional<std::string>& s) -> std::optional<std::filesystem::path> {
                if (!s) return std::nullopt;
                return std::filesystem::path(*s);
            };
            lanedrop::cmd_compare(resolve(o, "compare"), to_path(baseline_metrics), to_path(eval_metrics),
                                  std::cout);
        } else if (render->parsed()) {
            std::optional<std::filesystem::path> path;
            if (trajectory) path = *trajectory;
            lanedrop::cmd_render(resolve(o, "render"), path, std::cout);
        }
    } catch (const lanedrop::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const lanedrop::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
