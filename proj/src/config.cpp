#include "lanedrop/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace lanedrop {

using nlohmann::json;

namespace {

class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) {
            throw ConfigError(path_ + " must be a JSON object");
        }
    }

    template <typename T>
    void read(const char* key, T& field) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) {
            return;
        }
        try {
            field = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + " has the wrong type");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void reject_unknown() const {
        for (const auto& [key, _] : obj_.items()) {
            if (!seen_.contains(key)) {
                throw ConfigError("unknown config field " + where(key));
            }
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

json idm_json(const IdmParams& p) {
    return {{"a_max", p.a_max}, {"b_comfort", p.b_comfort}, {"v0", p.v0},
            {"delta", p.delta}, {"s0", p.s0},               {"t_headway", p.t_headway}};
}

void read_idm(const json& obj, IdmParams& p, const std::string& path) {
    Section s(obj, path);
    s.read("a_max", p.a_max);
    s.read("b_comfort", p.b_comfort);
    s.read("v0", p.v0);
    s.read("delta", p.delta);
    s.read("s0", p.s0);
    s.read("t_headway", p.t_headway);
    s.reject_unknown();
}

} // namespace

ScenarioSpec RunConfig::scenario_spec() const {
    return scenario_by_name(scenario);
}

ObsConfig RunConfig::obs_config() const {
    return ObsConfig::for_scenario(scenario_spec(), rho, max_sensed);
}

void RunConfig::validate() const {
    const ScenarioSpec spec = scenario_spec();
    static const std::set<std::string> modes{"train", "eval", "baseline", "compare", "render"};
    if (!modes.contains(mode)) {
        throw ConfigError("mode must be one of train, eval, baseline, compare, render");
    }
    if (episodes < 1) {
        throw ConfigError("episodes must be >= 1");
    }
    if (output_dir.empty()) {
        throw ConfigError("output_dir must not be empty");
    }
    sim.validate();
    obs_config().validate();
    reward.validate();
    train.validate();
    spec.validate();
}

json to_json(const RunConfig& cfg) {
    const auto& lc = cfg.sim.lane_change;
    const auto& t = cfg.train;
    json doc;
    doc["scenario"] = cfg.scenario;
    doc["mode"] = cfg.mode;
    doc["seed"] = cfg.seed;
    doc["episodes"] = cfg.episodes;
    doc["output_dir"] = cfg.output_dir;
    doc["checkpoint"] = cfg.checkpoint ? json(*cfg.checkpoint) : json(nullptr);
    doc["sim"] = {{"idm", idm_json(cfg.sim.idm)},
                  {"lane_change",
                   {{"safe_decel", lc.safe_decel},
                    {"incentive_threshold", lc.incentive_threshold},
                    {"mandatory_lookahead", lc.mandatory_lookahead},
                    {"cooldown", lc.cooldown}}},
                  {"vehicle_length", cfg.sim.vehicle_length},
                  {"emergency_decel", cfg.sim.emergency_decel},
                  {"substep", cfg.sim.substep},
                  {"substeps_per_step", cfg.sim.substeps_per_step},
                  {"guard_margin", cfg.sim.guard_margin}};
    doc["obs"] = {{"rho", cfg.rho}, {"max_sensed", cfg.max_sensed}};
    doc["reward"] = {{"beta", cfg.reward.beta}, {"window_t", cfg.reward.window_t}};
    doc["train"] = {{"discount", t.discount},
                    {"tau", t.tau},
                    {"actor_lr", t.actor_lr},
                    {"critic_lr", t.critic_lr},
                    {"batch_size", t.batch_size},
                    {"warmup_steps", t.warmup_steps},
                    {"ou_theta", t.ou_theta},
                    {"ou_sigma", t.ou_sigma},
                    {"buffer_capacity", t.buffer_capacity},
                    {"total_steps", t.total_steps},
                    {"max_episodes", t.max_episodes},
                    {"reward_scale", t.reward_scale},
                    {"checkpoint_every", t.checkpoint_every}};
    return doc;
}

RunConfig config_from_json(const json& doc, RunConfig cfg) {
    Section top(doc, "");
    top.read("scenario", cfg.scenario);
    top.read("mode", cfg.mode);
    top.read("seed", cfg.seed);
    top.read("episodes", cfg.episodes);
    top.read("output_dir", cfg.output_dir);
    if (const json* ck = top.child("checkpoint")) {
        if (ck->is_null()) {
            cfg.checkpoint.reset();
        } else if (ck->is_string()) {
            cfg.checkpoint = ck->get<std::string>();
        } else {
            throw ConfigError("checkpoint must be a string or null");
        }
    }
    if (const json* sim = top.child("sim")) {
        Section s(*sim, "sim");
        if (const json* idm = s.child("idm")) {
            read_idm(*idm, cfg.sim.idm, "sim.idm");
        }
        if (const json* lc = s.child("lane_change")) {
            Section l(*lc, "sim.lane_change");
            l.read("safe_decel", cfg.sim.lane_change.safe_decel);
            l.read("incentive_threshold", cfg.sim.lane_change.incentive_threshold);
            l.read("mandatory_lookahead", cfg.sim.lane_change.mandatory_lookahead);
            l.read("cooldown", cfg.sim.lane_change.cooldown);
            l.reject_unknown();
        }
        s.read("vehicle_length", cfg.sim.vehicle_length);
        s.read("emergency_decel", cfg.sim.emergency_decel);
        s.read("substep", cfg.sim.substep);
        s.read("substeps_per_step", cfg.sim.substeps_per_step);
        s.read("guard_margin", cfg.sim.guard_margin);
        s.reject_unknown();
    }
    if (const json* obs = top.child("obs")) {
        Section o(*obs, "obs");
        o.read("rho", cfg.rho);
        o.read("max_sensed", cfg.max_sensed);
        o.reject_unknown();
    }
    if (const json* reward = top.child("reward")) {
        Section r(*reward, "reward");
        r.read("beta", cfg.reward.beta);
        r.read("window_t", cfg.reward.window_t);
        r.reject_unknown();
    }
    if (const json* train = top.child("train")) {
        Section t(*train, "train");
        t.read("discount", cfg.train.discount);
        t.read("tau", cfg.train.tau);
        t.read("actor_lr", cfg.train.actor_lr);
        t.read("critic_lr", cfg.train.critic_lr);
        t.read("batch_size", cfg.train.batch_size);
        t.read("warmup_steps", cfg.train.warmup_steps);
        t.read("ou_theta", cfg.train.ou_theta);
        t.read("ou_sigma", cfg.train.ou_sigma);
        t.read("buffer_capacity", cfg.train.buffer_capacity);
        t.read("total_steps", cfg.train.total_steps);
        t.read("max_episodes", cfg.train.max_episodes);
        t.read("reward_scale", cfg.train.reward_scale);
        t.read("checkpoint_every", cfg.train.checkpoint_every);
        t.reject_unknown();
    }
    top.reject_unknown();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

std::string config_hash(const RunConfig& cfg) {
    const std::string text = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace lanedrop
