#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lanedrop/checkpoint.hpp"
#include "lanedrop/config.hpp"
#include "lanedrop/runner.hpp"

using namespace lanedrop;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lanedrop_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

RunConfig small_train(const fs::path& out) {
    RunConfig cfg;
    cfg.mode = "train";
    cfg.seed = 4;
    cfg.output_dir = out.string();
    cfg.train.total_steps = 400;
    cfg.train.warmup_steps = 100;
    cfg.train.batch_size = 16;
    return cfg;
}

} // namespace

TEST(Config, RoundTripIsIdentity) {
    RunConfig cfg;
    cfg.scenario = "severe";
    cfg.seed = 77;
    cfg.checkpoint = "ck.json";
    cfg.sim.idm.s0 = 2.5;
    cfg.reward.beta = 3.0;
    cfg.train.tau = 0.01;
    const auto doc = to_json(cfg);
    EXPECT_EQ(to_json(config_from_json(doc)), doc);
    EXPECT_EQ(config_hash(config_from_json(doc)), config_hash(cfg));
}

TEST(Config, UnknownFieldIsNamed) {
    try {
        config_from_json(nlohmann::json::parse(R"({"train": {"tua": 0.1}})"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("train.tua"), std::string::npos);
    }
}

TEST(Config, WrongTypeIsNamed) {
    try {
        config_from_json(nlohmann::json::parse(R"({"sim": {"idm": {"s0": "two"}}})"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("sim.idm.s0"), std::string::npos);
    }
}

TEST(Config, InvalidValuesRejectedBeforeRunning) {
    RunConfig cfg;
    cfg.sim.idm.delta = 0.5;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.train.tau = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.scenario = "nowhere";
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.rho = -1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Train, ZeroStepsEmitsInitialCheckpointAndEmptyLog) {
    const fs::path out = scratch("train0");
    RunConfig cfg = small_train(out);
    cfg.train.total_steps = 0;
    std::ostringstream progress;
    cmd_train(cfg, progress);
    EXPECT_TRUE(fs::exists(out / "checkpoint_final.json"));
    EXPECT_EQ(slurp(out / "training_log.csv"), "step,episode,reward,critic_loss,actor_objective\n");
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
    EXPECT_NO_THROW(load_policy(out / "checkpoint_final.json"));
}

TEST(Train, SameSeedGivesByteIdenticalLogs) {
    const fs::path a = scratch("train_a");
    const fs::path b = scratch("train_b");
    std::ostringstream progress;
    cmd_train(small_train(a), progress);
    cmd_train(small_train(b), progress);
    const std::string log = slurp(a / "training_log.csv");
    EXPECT_EQ(line_count(log), 401u);
    EXPECT_EQ(log, slurp(b / "training_log.csv"));
    EXPECT_EQ(slurp(a / "checkpoint_final.json"), slurp(b / "checkpoint_final.json"));
}

TEST(Train, UnwritableOutputFailsFast) {
    const fs::path blocker = scratch("blocker");
    std::ofstream(blocker) << "file";
    RunConfig cfg = small_train(blocker / "sub");
    std::ostringstream progress;
    EXPECT_THROW(cmd_train(cfg, progress), ConfigError);
    fs::remove(blocker);
}

TEST(Baseline, RewardFixedAcrossRunsAndArtifactsWritten) {
    const fs::path out = scratch("baseline");
    RunConfig cfg;
    cfg.output_dir = out.string();
    cfg.episodes = 3;
    std::ostringstream progress;
    const auto ms = cmd_baseline(cfg, progress);
    ASSERT_EQ(ms.size(), 3u);
    for (const auto& m : ms) {
        EXPECT_EQ(m.episode_reward, ms[0].episode_reward);
        EXPECT_EQ(m.throughput, 50);
        EXPECT_EQ(m.controller, "rule-based");
    }
    for (const char* f : {"episode_metrics.json", "mean_speed_grid.csv", "speed_std_grid.csv", "heatmap.svg",
                          "manifest.json", "trajectory.csv"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest["config_hash"], config_hash(cfg));
    EXPECT_EQ(manifest["seed"], 0);
    EXPECT_EQ(manifest["code_version"], LANEDROP_VERSION);
}

TEST(Eval, ZeroCheckpointCoastsAndIsDeterministic) {
    const fs::path out = scratch("eval");
    fs::create_directories(out);
    ActorParams zero = ActorParams::zeros();
    write_checkpoint(out / "zero.json", std::as_const(zero).tensors());
    RunConfig cfg;
    cfg.output_dir = (out / "run").string();
    cfg.episodes = 10;
    cfg.checkpoint = (out / "zero.json").string();
    std::ostringstream progress;
    const auto first = cmd_eval(cfg, progress);
    const auto second = cmd_eval(cfg, progress);
    ASSERT_EQ(first.size(), 10u);
    for (std::size_t i = 0; i < first.size(); ++i) {
        EXPECT_EQ(first[i].episode_reward, second[i].episode_reward);
        EXPECT_LE(first[i].episode_length, 2000);
    }
}

TEST(Eval, ShapeMismatchNamesTensor) {
    const fs::path out = scratch("eval_bad");
    fs::create_directories(out);
    Matrix wrong(2, 2);
    ActorParams zero = ActorParams::zeros();
    auto tensors = std::as_const(zero).tensors();
    tensors[0].value = &wrong;
    write_checkpoint(out / "bad.json", tensors);
    try {
        load_policy(out / "bad.json");
        FAIL() << "expected CheckpointError";
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find(tensors[0].name), std::string::npos);
    }
}

TEST(Compare, SelfComparisonHasZeroDeltas) {
    RunConfig cfg;
    cfg.episodes = 2;
    const auto ms = run_episodes(cfg, nullptr, 2);
    const auto report = compare_report(ms, ms);
    EXPECT_EQ(report["delta"]["mean_reward"], 0.0);
    EXPECT_EQ(report["delta"]["mean_throughput"], 0.0);
    for (const auto& e : report["episodes"]) {
        EXPECT_EQ(e["throughput_delta"], 0);
        EXPECT_TRUE(e.contains("baseline_cells_below_8kmh"));
        EXPECT_TRUE(e.contains("eval_cells_below_8kmh"));
    }
}

TEST(Compare, DeltaIsEvalMinusBaseline) {
    std::vector<EpisodeMetrics> base(1), eval(1);
    base[0].scenario = eval[0].scenario = "moderate";
    base[0].throughput = 40;
    eval[0].throughput = 45;
    const auto report = compare_report(base, eval);
    EXPECT_EQ(report["episodes"][0]["throughput_delta"], 5);
    std::ostringstream csv;
    write_compare_csv(csv, base, eval);
    EXPECT_NE(csv.str().find("\n0,40,45,5,"), std::string::npos);
}

TEST(Compare, ScenarioMismatchAndEmptySetsRejected) {
    std::vector<EpisodeMetrics> base(1), eval(1);
    base[0].scenario = "moderate";
    eval[0].scenario = "severe";
    EXPECT_THROW(compare_report(base, eval), ConfigError);
    EXPECT_THROW(compare_report({}, eval), ConfigError);
}

TEST(Compare, FromMetricFilesLeavesInputsUntouched) {
    const fs::path out = scratch("compare");
    RunConfig cfg;
    cfg.episodes = 2;
    cfg.output_dir = (out / "base").string();
    std::ostringstream progress;
    cmd_baseline(cfg, progress);
    const fs::path metrics = out / "base" / "episode_metrics.json";
    const std::string before = slurp(metrics);
    const auto stamp = fs::last_write_time(metrics);
    cfg.output_dir = (out / "cmp").string();
    const auto report = cmd_compare(cfg, metrics, metrics, progress);
    EXPECT_EQ(report["delta"]["mean_reward"], 0.0);
    EXPECT_EQ(slurp(metrics), before);
    EXPECT_EQ(fs::last_write_time(metrics), stamp);
    EXPECT_TRUE(fs::exists(out / "cmp" / "compare_report.json"));
    EXPECT_TRUE(fs::exists(out / "cmp" / "compare.csv"));
}

TEST(Metrics, JsonRoundTrip) {
    RunConfig cfg;
    const auto ms = run_episodes(cfg, nullptr, 1);
    const auto back = metrics_from_json(metrics_to_json(ms));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].episode_reward, ms[0].episode_reward);
    EXPECT_EQ(back[0].cells_below_8kmh, ms[0].cells_below_8kmh);
}

TEST(Trajectory, CsvRoundTripIsExact) {
    RunConfig cfg;
    const auto result = run_episode(cfg, nullptr, 0, true);
    std::stringstream ss;
    write_trajectory_csv(ss, result.trajectory);
    const auto back = read_trajectory_csv(ss);
    ASSERT_EQ(back.size(), result.trajectory.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].position, result.trajectory[i].position);
        EXPECT_EQ(back[i].speed, result.trajectory[i].speed);
        EXPECT_EQ(back[i].kind, result.trajectory[i].kind);
    }
}

TEST(Render, FromRecordedTrajectory) {
    const fs::path out = scratch("render");
    RunConfig cfg;
    cfg.output_dir = (out / "base").string();
    cfg.episodes = 1;
    std::ostringstream progress;
    cmd_baseline(cfg, progress);
    cfg.output_dir = (out / "render").string();
    cmd_render(cfg, out / "base" / "trajectory.csv", progress);
    EXPECT_EQ(slurp(out / "render" / "mean_speed_grid.csv"), slurp(out / "base" / "mean_speed_grid.csv"));
}
