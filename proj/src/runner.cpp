#include "lanedrop/runner.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "lanedrop/checkpoint.hpp"

namespace lanedrop {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kSlowCellKmh = 8.0;

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

BottleneckEnv make_env(const RunConfig& cfg) {
    return BottleneckEnv(cfg.scenario_spec(), cfg.sim, cfg.obs_config(), cfg.reward);
}

void ensure_writable(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path probe = dir / ".write_probe";
    std::ofstream out(probe);
    if (ec || !out) {
        throw ConfigError("output_dir " + dir.string() + " is not writable");
    }
    out.close();
    fs::remove(probe, ec);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    return out;
}

void write_manifest(const RunConfig& cfg, const std::string& command) {
    json m;
    m["command"] = command;
    m["config_hash"] = config_hash(cfg);
    m["seed"] = cfg.seed;
    m["code_version"] = LANEDROP_VERSION;
    m["config"] = to_json(cfg);
    open_out(fs::path(cfg.output_dir) / "manifest.json") << m.dump(2) << '\n';
}

void write_grids(const fs::path& dir, const EpisodeMetrics& m, double vmax_kmh) {
    auto mean_csv = open_out(dir / "mean_speed_grid.csv");
    m.grids.mean.write_csv(mean_csv);
    auto std_csv = open_out(dir / "speed_std_grid.csv");
    m.grids.stddev.write_csv(std_csv);
    auto svg = open_out(dir / "heatmap.svg");
    write_heatmap_svg(svg, m.grids.mean, ColorRamp::speed, vmax_kmh,
                      m.scenario + " / " + m.controller + ": mean speed (km/h)");
    auto std_svg = open_out(dir / "speed_std_heatmap.svg");
    write_heatmap_svg(std_svg, m.grids.stddev, ColorRamp::deviation, 0.5 * vmax_kmh,
                      m.scenario + " / " + m.controller + ": speed std (km/h)");
}

std::vector<EpisodeMetrics> run_and_emit(const RunConfig& cfg, const ActorParams* policy, const std::string& command,
                                         std::ostream& progress) {
    cfg.validate();
    ensure_writable(cfg.output_dir);
    write_manifest(cfg, command);
    std::vector<EpisodeMetrics> metrics;
    for (int i = 0; i < cfg.episodes; ++i) {
        EpisodeResult r = run_episode(cfg, policy, i, i == 0);
        progress << command << " episode " << i << ": reward " << num(r.metrics.episode_reward) << ", throughput "
                 << r.metrics.throughput << ", length " << r.metrics.episode_length << ", cells<8km/h "
                 << r.metrics.cells_below_8kmh << '\n';
        if (i == 0) {
            const fs::path dir(cfg.output_dir);
            write_grids(dir, r.metrics, cfg.scenario_spec().corridor.speed_limit * kMsToKmh);
            auto traj = open_out(dir / "trajectory.csv");
            write_trajectory_csv(traj, r.trajectory);
        }
        metrics.push_back(std::move(r.metrics));
    }
    open_out(fs::path(cfg.output_dir) / "episode_metrics.json") << metrics_to_json(metrics).dump(2) << '\n';
    return metrics;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    return json::parse(in);
}

double mean_of(const std::vector<EpisodeMetrics>& ms, double EpisodeMetrics::*field) {
    double total = 0.0;
    for (const auto& m : ms) {
        total += m.*field;
    }
    return ms.empty() ? 0.0 : total / static_cast<double>(ms.size());
}

double mean_int(const std::vector<EpisodeMetrics>& ms, int EpisodeMetrics::*field) {
    double total = 0.0;
    for (const auto& m : ms) {
        total += m.*field;
    }
    return ms.empty() ? 0.0 : total / static_cast<double>(ms.size());
}

} // namespace

EpisodeResult run_episode(const RunConfig& cfg, const ActorParams* policy, int episode_index, bool keep_trajectory) {
    BottleneckEnv env = make_env(cfg);
    env.set_recording(true);
    GraphObservation obs = env.reset(cfg.seed + static_cast<std::uint64_t>(episode_index));
    double total = 0.0;
    while (!env.done()) {
        StepOutcome out = policy ? env.step(actor_forward(obs, *policy)) : env.step_rule_based();
        total += out.reward;
        obs = std::move(out.obs);
    }
    EpisodeResult result;
    EpisodeMetrics& m = result.metrics;
    m.scenario = env.scenario().name;
    m.controller = policy ? "learned" : "rule-based";
    m.episode = episode_index;
    m.seed = cfg.seed + static_cast<std::uint64_t>(episode_index);
    m.episode_reward = total;
    m.throughput = env.state().exited_count;
    m.episode_length = env.elapsed_steps();
    m.grids = accumulate_grids(env.trajectory(), env.scenario().corridor.total_length);
    m.cells_below_8kmh = count_cells_below(m.grids.mean, kSlowCellKmh);
    if (keep_trajectory) {
        result.trajectory = env.trajectory();
    }
    return result;
}

std::vector<EpisodeMetrics> run_episodes(const RunConfig& cfg, const ActorParams* policy, int episodes) {
    std::vector<EpisodeMetrics> out;
    for (int i = 0; i < episodes; ++i) {
        out.push_back(run_episode(cfg, policy, i).metrics);
    }
    return out;
}

TrainResult train_agent(const RunConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    const TrainConfig& tc = cfg.train;
    TrainResult result;
    result.agent = std::make_unique<DdpgAgent>(tc, cfg.seed);
    DdpgAgent& agent = *result.agent;
    ReplayBuffer buffer(static_cast<std::size_t>(tc.buffer_capacity));
    BottleneckEnv env = make_env(cfg);

    if (hooks.step_log) {
        *hooks.step_log << "step,episode,reward,critic_loss,actor_objective\n";
    }
    if (hooks.episode_log) {
        *hooks.episode_log << "episode,steps,reward,throughput\n";
    }

    std::int64_t step = 0;
    int episode = 0;
    while (step < tc.total_steps && (tc.max_episodes == 0 || episode < tc.max_episodes)) {
        GraphObservation obs = env.reset(cfg.seed + static_cast<std::uint64_t>(episode));
        agent.begin_episode();
        double episode_reward = 0.0;
        int episode_steps = 0;
        while (!env.done() && step < tc.total_steps) {
            const bool warm = step < tc.warmup_steps;
            std::vector<double> actions = warm ? agent.random_action(obs.node_count()) : agent.act(obs, true);
            StepOutcome out = env.step(actions);
            episode_reward += out.reward;
            ++episode_steps;
            buffer.push({obs, std::move(actions), out.reward, out.obs, out.done});

            std::optional<UpdateStats> stats;
            if (!warm && buffer.size() >= static_cast<std::size_t>(tc.batch_size)) {
                stats = agent.update(buffer);
            }
            ++step;
            if (hooks.step_log) {
                *hooks.step_log << step << ',' << episode << ',' << num(out.reward) << ','
                                << (stats ? num(stats->critic_loss) : std::string()) << ','
                                << (stats ? num(stats->actor_objective) : std::string()) << '\n';
            }
            obs = std::move(out.obs);
        }
        result.episode_rewards.push_back(episode_reward);
        if (hooks.episode_log) {
            *hooks.episode_log << episode << ',' << episode_steps << ',' << num(episode_reward) << ','
                               << env.state().exited_count << '\n';
        }
        ++episode;
        if (hooks.on_episode) {
            hooks.on_episode(episode, episode_reward);
        }
        if (hooks.on_checkpoint && episode % tc.checkpoint_every == 0) {
            hooks.on_checkpoint(episode, agent);
        }
    }
    result.steps = step;
    result.episodes = episode;
    return result;
}

json metrics_to_json(const std::vector<EpisodeMetrics>& metrics) {
    json list = json::array();
    for (const auto& m : metrics) {
        list.push_back({{"scenario", m.scenario},
                        {"controller", m.controller},
                        {"episode", m.episode},
                        {"seed", m.seed},
                        {"episode_reward", m.episode_reward},
                        {"throughput", m.throughput},
                        {"episode_length", m.episode_length},
                        {"cells_below_8kmh", m.cells_below_8kmh}});
    }
    return list;
}

std::vector<EpisodeMetrics> metrics_from_json(const json& doc) {
    std::vector<EpisodeMetrics> out;
    for (const auto& e : doc) {
        EpisodeMetrics m;
        m.scenario = e.at("scenario").get<std::string>();
        m.controller = e.at("controller").get<std::string>();
        m.episode = e.at("episode").get<int>();
        m.seed = e.at("seed").get<std::uint64_t>();
        m.episode_reward = e.at("episode_reward").get<double>();
        m.throughput = e.at("throughput").get<int>();
        m.episode_length = e.at("episode_length").get<int>();
        m.cells_below_8kmh = e.at("cells_below_8kmh").get<int>();
        out.push_back(std::move(m));
    }
    return out;
}

json compare_report(const std::vector<EpisodeMetrics>& baseline, const std::vector<EpisodeMetrics>& eval) {
    if (baseline.empty() || eval.empty()) {
        throw ConfigError("compare: both metric sets must be non-empty");
    }
    for (const auto& m : baseline) {
        for (const auto& e : eval) {
            if (m.scenario != e.scenario) {
                throw ConfigError("compare: scenario mismatch (" + m.scenario + " vs " + e.scenario + ")");
            }
        }
    }
    json report;
    report["scenario"] = baseline.front().scenario;
    json episodes = json::array();
    const std::size_t n = std::min(baseline.size(), eval.size());
    for (std::size_t i = 0; i < n; ++i) {
        episodes.push_back({{"episode", i},
                            {"baseline_throughput", baseline[i].throughput},
                            {"eval_throughput", eval[i].throughput},
                            {"throughput_delta", eval[i].throughput - baseline[i].throughput},
                            {"baseline_reward", baseline[i].episode_reward},
                            {"eval_reward", eval[i].episode_reward},
                            {"reward_delta", eval[i].episode_reward - baseline[i].episode_reward},
                            {"baseline_length", baseline[i].episode_length},
                            {"eval_length", eval[i].episode_length},
                            {"baseline_cells_below_8kmh", baseline[i].cells_below_8kmh},
                            {"eval_cells_below_8kmh", eval[i].cells_below_8kmh}});
    }
    report["episodes"] = std::move(episodes);
    auto summary = [](const std::vector<EpisodeMetrics>& ms) {
        return json{{"episodes", ms.size()},
                    {"mean_reward", mean_of(ms, &EpisodeMetrics::episode_reward)},
                    {"mean_throughput", mean_int(ms, &EpisodeMetrics::throughput)},
                    {"mean_episode_length", mean_int(ms, &EpisodeMetrics::episode_length)},
                    {"mean_cells_below_8kmh", mean_int(ms, &EpisodeMetrics::cells_below_8kmh)}};
    };
    report["baseline"] = summary(baseline);
    report["eval"] = summary(eval);
    report["delta"] = {
        {"mean_reward", report["eval"]["mean_reward"].get<double>() - report["baseline"]["mean_reward"].get<double>()},
        {"mean_throughput",
         report["eval"]["mean_throughput"].get<double>() - report["baseline"]["mean_throughput"].get<double>()},
        {"mean_cells_below_8kmh", report["eval"]["mean_cells_below_8kmh"].get<double>() -
                                      report["baseline"]["mean_cells_below_8kmh"].get<double>()}};
    return report;
}

void write_compare_csv(std::ostream& out, const std::vector<EpisodeMetrics>& baseline,
                       const std::vector<EpisodeMetrics>& eval) {
    out << "episode,baseline_throughput,eval_throughput,throughput_delta,baseline_reward,eval_reward,"
           "baseline_length,eval_length,baseline_cells_below_8kmh,eval_cells_below_8kmh\n";
    const std::size_t n = std::min(baseline.size(), eval.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& b = baseline[i];
        const auto& e = eval[i];
        out << i << ',' << b.throughput << ',' << e.throughput << ',' << e.throughput - b.throughput << ','
            << num(b.episode_reward) << ',' << num(e.episode_reward) << ',' << b.episode_length << ','
            << e.episode_length << ',' << b.cells_below_8kmh << ',' << e.cells_below_8kmh << '\n';
    }
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
    out << "time,id,kind,lane,position,speed\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%d,%s,%d,%.17g,%.17g\n", r.time, r.id,
                      r.kind == VehicleKind::cav ? "CAV" : "HDV", r.lane, r.position, r.speed);
        out << buf;
    }
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
    std::vector<TrajectoryRow> rows;
    std::string line;
    if (!std::getline(in, line)) {
        return rows;
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ss, field, ',')) {
            f.push_back(field);
        }
        if (f.size() != 6) {
            throw std::invalid_argument("trajectory line " + std::to_string(line_no) + ": expected 6 fields");
        }
        TrajectoryRow r;
        r.time = std::stod(f[0]);
        r.id = std::stoi(f[1]);
        r.kind = f[2] == "CAV" ? VehicleKind::cav : VehicleKind::hdv;
        r.lane = std::stoi(f[3]);
        r.position = std::stod(f[4]);
        r.speed = std::stod(f[5]);
        rows.push_back(r);
    }
    return rows;
}

ActorParams load_policy(const fs::path& checkpoint) {
    ActorParams actor = ActorParams::zeros();
    auto refs = actor.tensors("actor");
    read_checkpoint(checkpoint, refs);
    return actor;
}

void cmd_train(const RunConfig& cfg, std::ostream& progress) {
    cfg.validate();
    const fs::path dir(cfg.output_dir);
    ensure_writable(dir);
    write_manifest(cfg, "train");
    auto step_log = open_out(dir / "training_log.csv");
    auto episode_log = open_out(dir / "episode_rewards.csv");
    TrainHooks hooks;
    hooks.step_log = &step_log;
    hooks.episode_log = &episode_log;
    hooks.on_checkpoint = [&](int episode, const DdpgAgent& agent) {
        char name[48];
        std::snprintf(name, sizeof name, "checkpoint_ep%05d.json", episode);
        write_checkpoint(dir / name, agent.tensors());
    };
    hooks.on_episode = [&](int episode, double reward) {
        progress << "episode " << episode << " reward " << num(reward) << '\n';
    };
    TrainResult result = train_agent(cfg, hooks);
    write_checkpoint(dir / "checkpoint_final.json", std::as_const(*result.agent).tensors());
    progress << "trained " << result.steps << " steps over " << result.episodes << " episodes\n";
}

std::vector<EpisodeMetrics> cmd_baseline(const RunConfig& cfg, std::ostream& progress) {
    return run_and_emit(cfg, nullptr, "baseline", progress);
}

std::vector<EpisodeMetrics> cmd_eval(const RunConfig& cfg, std::ostream& progress) {
    if (!cfg.checkpoint) {
        throw ConfigError("eval needs a checkpoint");
    }
    const ActorParams policy = load_policy(*cfg.checkpoint);
    return run_and_emit(cfg, &policy, "eval", progress);
}

json cmd_compare(const RunConfig& cfg, const std::optional<fs::path>& baseline_metrics,
                 const std::optional<fs::path>& eval_metrics, std::ostream& progress) {
    cfg.validate();
    const fs::path dir(cfg.output_dir);
    ensure_writable(dir);
    std::vector<EpisodeMetrics> baseline;
    std::vector<EpisodeMetrics> eval;
    if (baseline_metrics) {
        baseline = metrics_from_json(read_json(*baseline_metrics));
    } else {
        baseline = run_episodes(cfg, nullptr, cfg.episodes);
    }
    if (eval_metrics) {
        eval = metrics_from_json(read_json(*eval_metrics));
    } else {
        if (!cfg.checkpoint) {
            throw ConfigError("compare needs --checkpoint or --eval-metrics");
        }
        const ActorParams policy = load_policy(*cfg.checkpoint);
        eval = run_episodes(cfg, &policy, cfg.episodes);
    }
    write_manifest(cfg, "compare");
    json report = compare_report(baseline, eval);
    open_out(dir / "compare_report.json") << report.dump(2) << '\n';
    auto csv = open_out(dir / "compare.csv");
    write_compare_csv(csv, baseline, eval);
    progress << "mean reward: baseline " << num(report["baseline"]["mean_reward"].get<double>()) << ", eval "
             << num(report["eval"]["mean_reward"].get<double>()) << "\nmean throughput: baseline "
             << num(report["baseline"]["mean_throughput"].get<double>()) << ", eval "
             << num(report["eval"]["mean_throughput"].get<double>()) << '\n';
    return report;
}

void cmd_render(const RunConfig& cfg, const std::optional<fs::path>& trajectory, std::ostream& progress) {
    cfg.validate();
    const fs::path dir(cfg.output_dir);
    ensure_writable(dir);
    write_manifest(cfg, "render");
    const ScenarioSpec spec = cfg.scenario_spec();
    EpisodeMetrics m;
    m.scenario = spec.name;
    if (trajectory) {
        std::ifstream in(*trajectory);
        if (!in) {
            throw ConfigError("cannot open trajectory " + trajectory->string());
        }
        const auto rows = read_trajectory_csv(in);
        m.controller = "recorded";
        m.grids = accumulate_grids(rows, spec.corridor.total_length);
        m.cells_below_8kmh = count_cells_below(m.grids.mean, kSlowCellKmh);
    } else {
        std::optional<ActorParams> policy;
        if (cfg.checkpoint) {
            policy = load_policy(*cfg.checkpoint);
        }
        EpisodeResult r = run_episode(cfg, policy ? &*policy : nullptr, 0, true);
        auto traj = open_out(dir / "trajectory.csv");
        write_trajectory_csv(traj, r.trajectory);
        m = std::move(r.metrics);
    }
    write_grids(dir, m, spec.corridor.speed_limit * kMsToKmh);
    progress << "rendered " << m.grids.mean.space_cells() << "x" << m.grids.mean.time_cells() << " grid, "
             << m.cells_below_8kmh << " cells below 8 km/h\n";
}

} // namespace lanedrop
