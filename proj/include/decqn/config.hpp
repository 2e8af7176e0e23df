#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "decqn/agent.hpp"
#include "decqn/common.hpp"
#include "decqn/envs/cartpole.hpp"
#include "decqn/envs/matrix_games.hpp"
#include "decqn/envs/noise.hpp"

namespace decqn {

using json = nlohmann::json;

enum class Precision { kF32, kF64 };

namespace cfgdetail {

inline void check_keys(const json& j, const std::vector<std::string>& allowed,
                       const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(path + "." + it.key() + ": unknown key");
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    it->get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

inline void read_enum(const json& j, const char* key, std::string& out,
                      const std::vector<std::string>& choices, const std::string& path) {
  read_field(j, key, out, path);
  for (const auto& c : choices)
    if (out == c) return;
  std::string msg = path + "." + key + ": must be one of";
  for (const auto& c : choices) msg += " '" + c + "'";
  throw ConfigError(msg);
}

}  // namespace cfgdetail

// Environment selection plus all its constants. Exactly one of the known
// names; keys not meaningful for the chosen environment are rejected.
struct EnvConfig {
  std::string name;  // two_step | matrix_1step | matrix_pointmass | cartpole_swingup

  // Matrix games. `payoff` feeds the 1-step and point-mass variants; the
  // two-step game has one matrix per payout state.
  envs::PayoffMatrix payoff = envs::default_penalty_payoff(-50.0);
  envs::PayoffMatrix payoff_state2 = envs::default_two_step_state2();
  envs::PayoffMatrix payoff_state3 = envs::default_two_step_state3();

  envs::PointMassConfig pointmass;
  envs::CartpoleConfig cartpole;

  // Gaussian corruption applied by a wrapper; zero means no wrapper.
  double obs_noise_std = 0.0;
  double reward_noise_std = 0.0;

  bool operator==(const EnvConfig&) const = default;
};

struct GridConfig {
  int bins = 3;

  bool operator==(const GridConfig&) const = default;
};

struct RunConfig {
  long long total_env_steps = 100000;
  long long eval_interval = 10000;
  int eval_episodes = 10;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string output_dir;  // empty -> results/<name>
  // Env-step marks at which occupancy tables are dumped (small discrete
  // games only); the final step is always included.
  std::vector<long long> occupancy_snapshots;
  // Stop a seed early once the eval mean reaches this bar.
  std::optional<double> early_stop_eval_return;
  bool metrics_jsonl = false;

  bool operator==(const RunConfig&) const = default;
};

struct ExperimentConfig {
  std::string name;
  EnvConfig env;
  GridConfig grid;
  AgentConfig agent;
  Precision precision = Precision::kF32;
  RunConfig run;

  bool operator==(const ExperimentConfig&) const = default;

  static ExperimentConfig from_json(const json& j);
  json to_json() const;

  void validate() const {
    agent.validate();
    if (grid.bins < 2) throw ConfigError("grid.bins: must be >= 2");
    if (run.total_env_steps < 0) throw ConfigError("run.total_env_steps: must be >= 0");
    if (run.eval_interval < 1) throw ConfigError("run.eval_interval: must be >= 1");
    if (run.eval_episodes < 1) throw ConfigError("run.eval_episodes: must be >= 1");
    if (run.seeds.empty()) throw ConfigError("run.seeds: must list at least one seed");
  }
};

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
  using cfgdetail::check_keys;
  using cfgdetail::read_enum;
  using cfgdetail::read_field;

  check_keys(j, {"name", "env", "grid", "agent", "run"}, "config");
  ExperimentConfig c;
  read_field(j, "name", c.name, "config");

  if (!j.contains("env")) throw ConfigError("config.env: missing required section");
  const json& je = j.at("env");
  read_field(je, "name", c.env.name, "env");
  if (c.env.name.empty()) throw ConfigError("env.name: missing required key");

  std::vector<std::string> allowed = {"name", "obs_noise_std", "reward_noise_std"};
  if (c.env.name == "two_step") {
    allowed.insert(allowed.end(), {"payoff_state2", "payoff_state3"});
  } else if (c.env.name == "matrix_1step") {
    allowed.insert(allowed.end(), {"payoff"});
  } else if (c.env.name == "matrix_pointmass") {
    allowed.insert(allowed.end(),
                   {"payoff", "dt", "pos_bound", "vel_bound", "horizon", "reward_mode",
                    "zone_threshold", "state_reward_scale", "reset_vel",
                    "reset_vel_prob"});
  } else if (c.env.name == "cartpole_swingup") {
    allowed.insert(allowed.end(),
                   {"cart_mass", "pole_mass", "pole_half_length", "gravity", "force_max",
                    "dt", "action_repeat", "horizon", "actuators", "center_shaping",
                    "x_limit", "reset_noise"});
  } else {
    throw ConfigError("env.name: unknown environment '" + c.env.name + "'");
  }
  check_keys(je, allowed, "env");

  read_field(je, "payoff", c.env.payoff, "env");
  read_field(je, "payoff_state2", c.env.payoff_state2, "env");
  read_field(je, "payoff_state3", c.env.payoff_state3, "env");
  read_field(je, "obs_noise_std", c.env.obs_noise_std, "env");
  read_field(je, "reward_noise_std", c.env.reward_noise_std, "env");

  if (c.env.name == "matrix_pointmass") {
    auto& pm = c.env.pointmass;
    read_field(je, "dt", pm.dt, "env");
    read_field(je, "pos_bound", pm.pos_bound, "env");
    read_field(je, "vel_bound", pm.vel_bound, "env");
    read_field(je, "horizon", pm.horizon, "env");
    read_field(je, "zone_threshold", pm.zone_threshold, "env");
    read_field(je, "state_reward_scale", pm.state_reward_scale, "env");
    read_field(je, "reset_vel", pm.reset_vel, "env");
    read_field(je, "reset_vel_prob", pm.reset_vel_prob, "env");
    std::string mode = pm.reward == envs::PointMassReward::kAction ? "action" : "state";
    read_enum(je, "reward_mode", mode, {"action", "state"}, "env");
    pm.reward = mode == "action" ? envs::PointMassReward::kAction : envs::PointMassReward::kState;
  }
  if (c.env.name == "cartpole_swingup") {
    auto& cp = c.env.cartpole;
    read_field(je, "cart_mass", cp.cart_mass, "env");
    read_field(je, "pole_mass", cp.pole_mass, "env");
    read_field(je, "pole_half_length", cp.pole_half_length, "env");
    read_field(je, "gravity", cp.gravity, "env");
    read_field(je, "force_max", cp.force_max, "env");
    read_field(je, "dt", cp.dt, "env");
    read_field(je, "action_repeat", cp.action_repeat, "env");
    read_field(je, "horizon", cp.horizon, "env");
    read_field(je, "actuators", cp.actuators, "env");
    read_field(je, "center_shaping", cp.center_shaping, "env");
    read_field(je, "x_limit", cp.x_limit, "env");
    read_field(je, "reset_noise", cp.reset_noise, "env");
  }

  // Matrix games carry a fixed number of meaningful action values per
  // dimension; an agent grid of any other size would alias onto the payoff
  // cells. The grid width defaults to the native count and must match it.
  int native_bins = 0;
  if (c.env.name == "two_step") native_bins = 2;
  if (c.env.name == "matrix_1step" || c.env.name == "matrix_pointmass")
    native_bins = static_cast<int>(c.env.payoff.size());

  bool bins_given = false;
  if (j.contains("grid")) {
    const json& jg = j.at("grid");
    check_keys(jg, {"bins"}, "grid");
    bins_given = jg.contains("bins");
    read_field(jg, "bins", c.grid.bins, "grid");
  }
  if (native_bins > 0) {
    if (!bins_given) c.grid.bins = native_bins;
    if (c.grid.bins != native_bins)
      throw ConfigError("grid.bins: env '" + c.env.name + "' supports exactly " +
                        std::to_string(native_bins) + " action values per dimension");
  }

  if (j.contains("agent")) {
    const json& ja = j.at("agent");
    check_keys(ja,
               {"precision", "gamma", "n_step", "batch_size", "learning_rate", "hidden",
                "grad_clip", "target_update_period", "priority_alpha", "is_beta",
                "epsilon", "replay_capacity", "min_fill", "learner_period", "use_per",
                "use_double_q", "use_nstep", "optimistic", "aggregation", "loss_mode",
                "enumerated_dqn", "enumerated_budget_bytes", "huber_delta"},
               "agent");
    auto& a = c.agent;
    std::string precision = "f32";
    read_enum(ja, "precision", precision, {"f32", "f64"}, "agent");
    c.precision = precision == "f32" ? Precision::kF32 : Precision::kF64;
    read_field(ja, "gamma", a.gamma, "agent");
    read_field(ja, "n_step", a.n_step, "agent");
    read_field(ja, "batch_size", a.batch_size, "agent");
    read_field(ja, "learning_rate", a.learning_rate, "agent");
    read_field(ja, "hidden", a.hidden, "agent");
    read_field(ja, "grad_clip", a.grad_clip, "agent");
    read_field(ja, "target_update_period", a.target_update_period, "agent");
    read_field(ja, "priority_alpha", a.priority_alpha, "agent");
    read_field(ja, "is_beta", a.is_beta, "agent");
    read_field(ja, "epsilon", a.epsilon, "agent");
    read_field(ja, "replay_capacity", a.replay_capacity, "agent");
    read_field(ja, "min_fill", a.min_fill, "agent");
    read_field(ja, "learner_period", a.learner_period, "agent");
    read_field(ja, "use_per", a.use_per, "agent");
    read_field(ja, "use_double_q", a.use_double_q, "agent");
    read_field(ja, "use_nstep", a.use_nstep, "agent");
    read_field(ja, "optimistic", a.optimistic, "agent");
    std::string agg = a.aggregation == Aggregation::kMean ? "mean" : "sum";
    read_enum(ja, "aggregation", agg, {"mean", "sum"}, "agent");
    a.aggregation = agg == "mean" ? Aggregation::kMean : Aggregation::kSum;
    std::string lm = a.loss_mode == LossMode::kJoint ? "joint" : "independent";
    read_enum(ja, "loss_mode", lm, {"joint", "independent"}, "agent");
    a.loss_mode = lm == "joint" ? LossMode::kJoint : LossMode::kIndependent;
    read_field(ja, "enumerated_dqn", a.enumerated_dqn, "agent");
    read_field(ja, "enumerated_budget_bytes", a.enumerated_budget_bytes, "agent");
    read_field(ja, "huber_delta", a.huber_delta, "agent");
  }

  if (j.contains("run")) {
    const json& jr = j.at("run");
    check_keys(jr,
               {"total_env_steps", "eval_interval", "eval_episodes", "seeds",
                "output_dir", "occupancy_snapshots", "early_stop_eval_return",
                "metrics_jsonl"},
               "run");
    auto& r = c.run;
    read_field(jr, "total_env_steps", r.total_env_steps, "run");
    read_field(jr, "eval_interval", r.eval_interval, "run");
    read_field(jr, "eval_episodes", r.eval_episodes, "run");
    read_field(jr, "seeds", r.seeds, "run");
    read_field(jr, "output_dir", r.output_dir, "run");
    read_field(jr, "occupancy_snapshots", r.occupancy_snapshots, "run");
    if (auto it = jr.find("early_stop_eval_return"); it != jr.end() && !it->is_null()) {
      double bar = 0.0;
      read_field(jr, "early_stop_eval_return", bar, "run");
      r.early_stop_eval_return = bar;
    }
    read_field(jr, "metrics_jsonl", r.metrics_jsonl, "run");
  }

  if (c.name.empty()) c.name = c.env.name;
  envs::validate_payoff(c.env.payoff, "env.payoff");
  envs::validate_payoff(c.env.payoff_state2, "env.payoff_state2");
  envs::validate_payoff(c.env.payoff_state3, "env.payoff_state3");
  c.validate();
  return c;
}

inline json ExperimentConfig::to_json() const {
  json j;
  j["name"] = name;

  json je;
  je["name"] = env.name;
  je["obs_noise_std"] = env.obs_noise_std;
  je["reward_noise_std"] = env.reward_noise_std;
  if (env.name == "two_step") {
    je["payoff_state2"] = env.payoff_state2;
    je["payoff_state3"] = env.payoff_state3;
  } else if (env.name == "matrix_1step") {
    je["payoff"] = env.payoff;
  } else if (env.name == "matrix_pointmass") {
    je["payoff"] = env.payoff;
    je["dt"] = env.pointmass.dt;
    je["pos_bound"] = env.pointmass.pos_bound;
    je["vel_bound"] = env.pointmass.vel_bound;
    je["horizon"] = env.pointmass.horizon;
    je["reward_mode"] =
        env.pointmass.reward == envs::PointMassReward::kAction ? "action" : "state";
    je["zone_threshold"] = env.pointmass.zone_threshold;
    je["reset_vel"] = env.pointmass.reset_vel;
    je["reset_vel_prob"] = env.pointmass.reset_vel_prob;
    je["state_reward_scale"] = env.pointmass.state_reward_scale;
  } else if (env.name == "cartpole_swingup") {
    je["cart_mass"] = env.cartpole.cart_mass;
    je["pole_mass"] = env.cartpole.pole_mass;
    je["pole_half_length"] = env.cartpole.pole_half_length;
    je["gravity"] = env.cartpole.gravity;
    je["force_max"] = env.cartpole.force_max;
    je["dt"] = env.cartpole.dt;
    je["action_repeat"] = env.cartpole.action_repeat;
    je["horizon"] = env.cartpole.horizon;
    je["actuators"] = env.cartpole.actuators;
    je["center_shaping"] = env.cartpole.center_shaping;
    je["x_limit"] = env.cartpole.x_limit;
    je["reset_noise"] = env.cartpole.reset_noise;
  }
  j["env"] = je;

  j["grid"] = json{{"bins", grid.bins}};

  json ja;
  ja["precision"] = precision == Precision::kF32 ? "f32" : "f64";
  ja["gamma"] = agent.gamma;
  ja["n_step"] = agent.n_step;
  ja["batch_size"] = agent.batch_size;
  ja["learning_rate"] = agent.learning_rate;
  ja["hidden"] = agent.hidden;
  ja["grad_clip"] = agent.grad_clip;
  ja["target_update_period"] = agent.target_update_period;
  ja["priority_alpha"] = agent.priority_alpha;
  ja["is_beta"] = agent.is_beta;
  ja["epsilon"] = agent.epsilon;
  ja["replay_capacity"] = agent.replay_capacity;
  ja["min_fill"] = agent.min_fill;
  ja["learner_period"] = agent.learner_period;
  ja["use_per"] = agent.use_per;
  ja["use_double_q"] = agent.use_double_q;
  ja["use_nstep"] = agent.use_nstep;
  ja["optimistic"] = agent.optimistic;
  ja["aggregation"] = agent.aggregation == Aggregation::kMean ? "mean" : "sum";
  ja["loss_mode"] = agent.loss_mode == LossMode::kJoint ? "joint" : "independent";
  ja["enumerated_dqn"] = agent.enumerated_dqn;
  ja["enumerated_budget_bytes"] = agent.enumerated_budget_bytes;
  ja["huber_delta"] = agent.huber_delta;
  j["agent"] = ja;

  json jr;
  jr["total_env_steps"] = run.total_env_steps;
  jr["eval_interval"] = run.eval_interval;
  jr["eval_episodes"] = run.eval_episodes;
  jr["seeds"] = run.seeds;
  jr["output_dir"] = run.output_dir;
  jr["occupancy_snapshots"] = run.occupancy_snapshots;
  if (run.early_stop_eval_return)
    jr["early_stop_eval_return"] = *run.early_stop_eval_return;
  else
    jr["early_stop_eval_return"] = nullptr;
  jr["metrics_jsonl"] = run.metrics_jsonl;
  j["run"] = jr;
  return j;
}

// Applies one `a.b.c=value` override to the raw document before parsing.
// Values are parsed as JSON when possible and fall back to plain strings, so
// `agent.epsilon=0.5`, `agent.use_per=false`, and `agent.aggregation=sum`
// all do the natural thing. Typos surface as unknown-key errors.
inline void apply_override(json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + spec + "': expected key.path=value");
  const std::string key = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;
  }

  json* node = &root;
  std::size_t begin = 0;
  while (true) {
    const auto dot = key.find('.', begin);
    const std::string part = key.substr(begin, dot - begin);
    if (part.empty()) throw ConfigError("override '" + spec + "': empty key segment");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(parsed);
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    if (!node->is_object())
      throw ConfigError("override '" + spec + "': '" + part + "' is not a section");
    begin = dot + 1;
  }
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  for (const auto& o : overrides) apply_override(j, o);
  return ExperimentConfig::from_json(j);
}

// Builds the configured environment. The master seed feeds the env's own
// stream derivation, so train and eval instances just pass different seeds.
inline std::unique_ptr<Env> make_env(const EnvConfig& cfg, std::uint64_t seed) {
  std::unique_ptr<Env> env;
  if (cfg.name == "two_step") {
    env = std::make_unique<envs::TwoStepGame>(cfg.payoff_state2, cfg.payoff_state3);
  } else if (cfg.name == "matrix_1step") {
    env = std::make_unique<envs::MatrixOneStepEnv>(cfg.payoff);
  } else if (cfg.name == "matrix_pointmass") {
    env = std::make_unique<envs::PointMassMatrixEnv>(cfg.payoff, cfg.pointmass, seed);
  } else if (cfg.name == "cartpole_swingup") {
    env = std::make_unique<envs::CartpoleSwingupEnv>(cfg.cartpole, seed);
  } else {
    throw ConfigError("env.name: unknown environment '" + cfg.name + "'");
  }
  if (cfg.obs_noise_std > 0.0 || cfg.reward_noise_std > 0.0)
    env = std::make_unique<envs::GaussianNoiseEnv>(std::move(env), cfg.obs_noise_std,
                                                   cfg.reward_noise_std, seed);
  return env;
}

// Stable 64-bit fingerprint of the canonical serialized form; keys runs in
// caches and names checkpoint-compatible artifacts.
inline std::uint64_t config_fingerprint(const ExperimentConfig& cfg) {
  const std::string s = cfg.to_json().dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace decqn
