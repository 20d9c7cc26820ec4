#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <vector>

#include "lanedrop/checkpoint.hpp"
#include "lanedrop/config.hpp"
#include "lanedrop/env.hpp"
#include "lanedrop/runner.hpp"

namespace py = pybind11;
using namespace lanedrop;

namespace {

py::list matrix_rows(const Matrix& m) {
    py::list rows;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        py::list row;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            row.append(m(r, c));
        }
        rows.append(row);
    }
    return rows;
}

py::dict observation_dict(const GraphObservation& obs) {
    py::dict d;
    d["features"] = matrix_rows(obs.features);
    d["adjacency"] = matrix_rows(obs.adjacency);
    d["cav_ids"] = obs.cav_ids;
    return d;
}

py::dict metrics_dict(const EpisodeMetrics& m) {
    py::dict d;
    d["scenario"] = m.scenario;
    d["controller"] = m.controller;
    d["episode"] = m.episode;
    d["seed"] = m.seed;
    d["episode_reward"] = m.episode_reward;
    d["throughput"] = m.throughput;
    d["episode_length"] = m.episode_length;
    d["cells_below_8kmh"] = m.cells_below_8kmh;
    return d;
}

RunConfig config_from_string(const std::string& text) {
    return config_from_json(nlohmann::json::parse(text));
}

} // namespace

PYBIND11_MODULE(_lanedrop, m) {
    m.doc() = "Lane-drop bottleneck simulator and graph-based DDPG controller";
    m.attr("__version__") = LANEDROP_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);
    py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);

    py::class_<IdmParams>(m, "IdmParams")
        .def(py::init<>())
        .def_readwrite("a_max", &IdmParams::a_max)
        .def_readwrite("b_comfort", &IdmParams::b_comfort)
        .def_readwrite("v0", &IdmParams::v0)
        .def_readwrite("delta", &IdmParams::delta)
        .def_readwrite("s0", &IdmParams::s0)
        .def_readwrite("t_headway", &IdmParams::t_headway);

    m.def("idm_acceleration", &idm_acceleration, py::arg("v"), py::arg("gap"), py::arg("v_lead"),
          py::arg("idm") = IdmParams{}, py::arg("emergency_decel") = 6.0);
    m.def("free_road", [] { return kFreeRoad; });

    py::class_<ScenarioSpec>(m, "ScenarioSpec")
        .def_readonly("name", &ScenarioSpec::name)
        .def_readonly("inflow_rate", &ScenarioSpec::inflow_rate)
        .def_readonly("total_vehicles", &ScenarioSpec::total_vehicles)
        .def_readonly("cav_count", &ScenarioSpec::cav_count)
        .def_readonly("horizon_steps", &ScenarioSpec::horizon_steps)
        .def_property_readonly("length", [](const ScenarioSpec& s) { return s.corridor.total_length; })
        .def_property_readonly("segments",
                               [](const ScenarioSpec& s) {
                                   std::vector<std::pair<double, int>> out;
                                   for (const auto& seg : s.corridor.segments) {
                                       out.emplace_back(seg.start, seg.lane_count);
                                   }
                                   return out;
                               })
        .def("penetration", &ScenarioSpec::penetration);
    m.def("scenario", &scenario_by_name, py::arg("name"));

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_static("from_json", &config_from_string, py::arg("text"))
        .def("to_json", [](const RunConfig& c) { return to_json(c).dump(); })
        .def("hash", &config_hash)
        .def("validate", &RunConfig::validate)
        .def_readwrite("scenario", &RunConfig::scenario)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("episodes", &RunConfig::episodes)
        .def_readwrite("output_dir", &RunConfig::output_dir);

    py::class_<BottleneckEnv>(m, "BottleneckEnv")
        .def(py::init([](const std::string& scenario) {
                 RunConfig cfg;
                 cfg.scenario = scenario;
                 return BottleneckEnv(cfg.scenario_spec(), cfg.sim, cfg.obs_config(), cfg.reward);
             }),
             py::arg("scenario") = "moderate")
        .def("reset", [](BottleneckEnv& env, std::uint64_t seed) { return observation_dict(env.reset(seed)); },
             py::arg("seed") = 0)
        .def("step",
             [](BottleneckEnv& env, const std::vector<double>& actions) {
                 StepOutcome out = env.step(actions);
                 return py::make_tuple(observation_dict(out.obs), out.reward, out.done,
                                       py::dict(py::arg("r1") = out.info.r1, py::arg("r2") = out.info.r2,
                                                py::arg("exited") = out.info.exited));
             })
        .def("step_rule_based",
             [](BottleneckEnv& env) {
                 StepOutcome out = env.step_rule_based();
                 return py::make_tuple(observation_dict(out.obs), out.reward, out.done);
             })
        .def_property_readonly("done", &BottleneckEnv::done)
        .def_property_readonly("elapsed_steps", &BottleneckEnv::elapsed_steps)
        .def_property_readonly("exited", [](const BottleneckEnv& env) { return env.state().exited_count; })
        .def_property_readonly("time", [](const BottleneckEnv& env) { return env.state().time; });

    m.def(
        "run_baseline",
        [](const RunConfig& cfg) {
            py::list out;
            for (const auto& metrics : run_episodes(cfg, nullptr, cfg.episodes)) {
                out.append(metrics_dict(metrics));
            }
            return out;
        },
        py::arg("config"));
    m.def(
        "run_policy",
        [](const RunConfig& cfg, const std::string& checkpoint) {
            const ActorParams policy = load_policy(checkpoint);
            py::list out;
            for (const auto& metrics : run_episodes(cfg, &policy, cfg.episodes)) {
                out.append(metrics_dict(metrics));
            }
            return out;
        },
        py::arg("config"), py::arg("checkpoint"));
}
