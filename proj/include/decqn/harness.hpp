#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "decqn/agent.hpp"
#include "decqn/config.hpp"
#include "decqn/oracle.hpp"

namespace decqn {

namespace fs = std::filesystem;

// Fixed-width-free, locale-free float formatting for the CSV artifacts.
inline std::string fmt_csv(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline json num_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

// One logging-interval row. Wall time stays out of the CSV on purpose: the
// metrics stream is byte-identical across reruns of the same seed, and a
// timing column would break that. Totals land in summary.json instead.
struct MetricsRow {
  long long env_step = 0;
  long long learner_step = 0;
  double train_return = std::numeric_limits<double>::quiet_NaN();
  double eval_return_mean = std::numeric_limits<double>::quiet_NaN();
  double eval_return_std = std::numeric_limits<double>::quiet_NaN();
  double loss = std::numeric_limits<double>::quiet_NaN();
  double mean_abs_td = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  double epsilon = 0.0;
  double wall_seconds = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "env_step,learner_step,train_return,eval_return_mean,eval_return_std,loss,"
    "mean_abs_td,grad_norm,epsilon";

inline void append_csv(std::ostream& os, const MetricsRow& r) {
  os << r.env_step << ',' << r.learner_step << ',' << fmt_csv(r.train_return) << ','
     << fmt_csv(r.eval_return_mean) << ',' << fmt_csv(r.eval_return_std) << ','
     << fmt_csv(r.loss) << ',' << fmt_csv(r.mean_abs_td) << ',' << fmt_csv(r.grad_norm)
     << ',' << fmt_csv(r.epsilon) << '\n';
}

inline json row_json(const MetricsRow& r) {
  json j;
  j["env_step"] = r.env_step;
  j["learner_step"] = r.learner_step;
  j["train_return"] = num_or_null(r.train_return);
  j["eval_return_mean"] = num_or_null(r.eval_return_mean);
  j["eval_return_std"] = num_or_null(r.eval_return_std);
  j["loss"] = num_or_null(r.loss);
  j["mean_abs_td"] = num_or_null(r.mean_abs_td);
  j["grad_norm"] = num_or_null(r.grad_norm);
  j["epsilon"] = r.epsilon;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

// Cumulative (state, joint-action) visit counts for the small discrete games,
// written next to the critic's predicted value of each cell. Disabled when the
// cell count would be unreasonable.
class OccupancyTable {
 public:
  static constexpr long long kMaxCells = 200000;

  OccupancyTable() = default;

  OccupancyTable(int states, int dims, int bins)
      : states_(states), dims_(dims), bins_(bins) {
    long long joint = 1;
    for (int j = 0; j < dims; ++j) {
      if (joint > kMaxCells / bins) return;
      joint *= bins;
    }
    if (static_cast<long long>(states) * joint > kMaxCells) return;
    joint_ = joint;
    counts_.assign(static_cast<std::size_t>(states) * joint, 0);
  }

  bool active() const { return !counts_.empty(); }
  long long total() const { return total_; }
  const std::vector<long long>& counts() const { return counts_; }

  void record(int state, std::span<const int> bins) {
    if (!active()) return;
    counts_[static_cast<std::size_t>(state) * joint_ + encode(bins)] += 1;
    ++total_;
  }

  long long encode(std::span<const int> bins) const {
    long long code = 0;
    for (int j = 0; j < dims_; ++j) code = code * bins_ + bins[j];
    return code;
  }

  void decode(long long code, std::vector<int>& bins) const {
    bins.assign(dims_, 0);
    for (int j = dims_ - 1; j >= 0; --j) {
      bins[j] = static_cast<int>(code % bins_);
      code /= bins_;
    }
  }

  // q(state, action bins) supplies the critic's current prediction per cell.
  void write_csv(std::ostream& os,
                 const std::function<double(int, const std::vector<int>&)>& q) const {
    os << "state";
    for (int j = 0; j < dims_; ++j) os << ",bin" << j;
    os << ",count,mean_q\n";
    std::vector<int> bins;
    for (int s = 0; s < states_; ++s)
      for (long long c = 0; c < joint_; ++c) {
        decode(c, bins);
        os << s;
        for (int b : bins) os << ',' << b;
        os << ',' << counts_[static_cast<std::size_t>(s) * joint_ + c] << ','
           << fmt_csv(q(s, bins)) << '\n';
      }
  }

 private:
  int states_ = 0, dims_ = 0, bins_ = 0;
  long long joint_ = 0;
  long long total_ = 0;
  std::vector<long long> counts_;
};

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> returns;
};

using BatchPolicy = std::function<std::vector<std::vector<double>>(
    const std::vector<std::vector<double>>&)>;

// Runs `episodes` fresh environments in lockstep under the given policy and
// totals the clean (un-noised) rewards. One batched policy call per step.
inline EvalResult evaluate_policy(const BatchPolicy& policy, const EnvConfig& ecfg,
                                  int episodes, std::uint64_t eval_seed) {
  if (episodes < 1) throw ConfigError("evaluate: episodes must be >= 1");
  std::vector<std::unique_ptr<Env>> envs;
  std::vector<std::vector<double>> obs(episodes);
  std::vector<char> done(episodes, 0);
  EvalResult res;
  res.returns.assign(episodes, 0.0);
  for (int e = 0; e < episodes; ++e) {
    envs.push_back(make_env(ecfg, derive_seed(eval_seed, static_cast<std::uint64_t>(e))));
    obs[e] = envs[e]->reset();
  }

  int alive = episodes;
  std::vector<std::vector<double>> batch;
  std::vector<int> idx;
  long long guard = 0;
  while (alive > 0) {
    batch.clear();
    idx.clear();
    for (int e = 0; e < episodes; ++e)
      if (!done[e]) {
        batch.push_back(obs[e]);
        idx.push_back(e);
      }
    auto actions = policy(batch);
    if (actions.size() != batch.size())
      throw LogicError("evaluate: policy returned wrong batch size");
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const int e = idx[k];
      auto r = envs[e]->step(actions[k]);
      res.returns[e] += r.clean_reward;
      obs[e] = std::move(r.next_obs);
      if (r.terminal || r.timeout) {
        done[e] = 1;
        --alive;
      }
    }
    if (++guard > (1ll << 24))
      throw LogicError("evaluate: episodes did not terminate");
  }

  double sum = 0.0;
  for (double r : res.returns) sum += r;
  res.mean = sum / episodes;
  double sq = 0.0;
  for (double r : res.returns) sq += (r - res.mean) * (r - res.mean);
  res.stddev = std::sqrt(sq / episodes);
  return res;
}

// Greedy evaluation of a trained agent (epsilon 0; never touches the agent's
// exploration stream).
template <typename T>
EvalResult evaluate(Agent<T>& agent, const EnvConfig& ecfg, int episodes,
                    std::uint64_t eval_seed) {
  return evaluate_policy(
      [&agent](const std::vector<std::vector<double>>& batch) {
        auto bins = agent.greedy_actions(batch);
        std::vector<std::vector<double>> actions(bins.size());
        for (std::size_t i = 0; i < bins.size(); ++i)
          actions[i] = agent.grid().action(bins[i]);
        return actions;
      },
      ecfg, episodes, eval_seed);
}

// Constant-policy reference return for the state-reward point mass: drive
// straight at the best zone and sit there. Achievable by construction, so it
// is a sound comparison floor.
inline double pointmass_state_reference(const envs::PayoffMatrix& payoff,
                                        envs::PointMassConfig pm) {
  pm.reward = envs::PointMassReward::kState;
  const auto opt = matrix_optimum(payoff);
  const double dir[3] = {-1.0, 0.0, 1.0};
  envs::PointMassMatrixEnv env(payoff, pm, 0);
  env.reset();
  double total = 0.0;
  const std::vector<double> a{dir[opt.a1], dir[opt.a2]};
  for (int t = 0; t < pm.horizon; ++t) total += env.step(a).reward;
  return total;
}

// Ground-truth reference values for the configured task, computed fresh by
// the oracles. `optimal_return` is null where no exact value exists.
inline json compute_oracle(const ExperimentConfig& cfg) {
  json o;
  o["env"] = cfg.env.name;
  if (cfg.env.name == "two_step") {
    const auto mdp = two_step_mdp(cfg.env.payoff_state2, cfg.env.payoff_state3);
    const auto sol = value_iterate(mdp, 1.0);
    o["optimal_return"] = sol.optimal_return;
    o["state_values"] = sol.values;
    const auto f2 = additive_fit(cfg.env.payoff_state2);
    const auto f3 = additive_fit(cfg.env.payoff_state3);
    o["additive_fit_state2"] = {{"sse", f2.sse}, {"max_abs_residual", f2.max_abs_residual}};
    o["additive_fit_state3"] = {{"sse", f3.sse}, {"max_abs_residual", f3.max_abs_residual}};
  } else if (cfg.env.name == "matrix_1step") {
    const auto opt = matrix_optimum(cfg.env.payoff);
    const auto fit = additive_fit(cfg.env.payoff);
    o["optimal_return"] = opt.value;
    o["optimal_cell"] = {opt.a1, opt.a2};
    o["additive_fit"] = {{"sse", fit.sse}, {"max_abs_residual", fit.max_abs_residual}};
  } else if (cfg.env.name == "matrix_pointmass") {
    const auto opt = matrix_optimum(cfg.env.payoff);
    const auto fit = additive_fit(cfg.env.payoff);
    o["matrix_optimum"] = opt.value;
    o["optimal_cell"] = {opt.a1, opt.a2};
    o["additive_fit"] = {{"sse", fit.sse}, {"max_abs_residual", fit.max_abs_residual}};
    if (cfg.env.pointmass.reward == envs::PointMassReward::kAction) {
      // Reward depends only on the per-step action pair, so the optimum is
      // the best cell paid every step.
      o["optimal_return"] = opt.value * cfg.env.pointmass.horizon;
    } else {
      const double ref = pointmass_state_reference(cfg.env.payoff, cfg.env.pointmass);
      o["optimal_return"] = nullptr;
      o["constant_policy_reference"] = ref;
      o["upper_bound"] =
          opt.value * cfg.env.pointmass.state_reward_scale * cfg.env.pointmass.horizon;
    }
  } else if (cfg.env.name == "cartpole_swingup") {
    o["optimal_return"] = nullptr;
    o["upper_bound"] = static_cast<double>(cfg.env.cartpole.horizon);
  }
  return o;
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  long long env_steps = 0;
  long long learner_steps = 0;
  double final_eval_mean = std::numeric_limits<double>::quiet_NaN();
  double final_eval_std = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> final_eval_returns;
  bool early_stopped = false;
  bool numeric_failure = false;
  std::string error;
  double wall_seconds = 0.0;
};

inline void write_summary(const fs::path& path, const ExperimentConfig& cfg,
                          const SeedOutcome& out) {
  json s;
  s["seed"] = out.seed;
  s["env_steps"] = out.env_steps;
  s["learner_steps"] = out.learner_steps;
  s["final_eval_mean"] = num_or_null(out.final_eval_mean);
  s["final_eval_std"] = num_or_null(out.final_eval_std);
  s["final_eval_returns"] = out.final_eval_returns;
  s["early_stopped"] = out.early_stopped;
  s["status"] = out.numeric_failure ? "numeric_error" : "ok";
  s["error"] = out.error;
  s["wall_seconds"] = out.wall_seconds;
  char fp[24];
  std::snprintf(fp, sizeof fp, "%016llx",
                static_cast<unsigned long long>(config_fingerprint(cfg)));
  s["config_fingerprint"] = fp;
  const json oracle = compute_oracle(cfg);
  if (oracle.contains("optimal_return") && oracle["optimal_return"].is_number() &&
      std::isfinite(out.final_eval_mean)) {
    const double opt = oracle["optimal_return"].get<double>();
    s["oracle_optimal_return"] = opt;
    s["oracle_fraction"] = opt != 0.0 ? out.final_eval_mean / opt
                                      : std::numeric_limits<double>::quiet_NaN();
  }
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << s.dump(2) << "\n";
}

inline SeedOutcome load_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json s;
  try {
    s = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("bad summary " + path.string() + ": " + e.what());
  }
  SeedOutcome o;
  o.seed = s.value("seed", 0ull);
  o.env_steps = s.value("env_steps", 0ll);
  o.learner_steps = s.value("learner_steps", 0ll);
  if (s.contains("final_eval_mean") && s["final_eval_mean"].is_number())
    o.final_eval_mean = s["final_eval_mean"].get<double>();
  if (s.contains("final_eval_std") && s["final_eval_std"].is_number())
    o.final_eval_std = s["final_eval_std"].get<double>();
  o.final_eval_returns = s.value("final_eval_returns", std::vector<double>{});
  o.early_stopped = s.value("early_stopped", false);
  o.numeric_failure = s.value("status", std::string("ok")) != "ok";
  o.error = s.value("error", std::string());
  o.wall_seconds = s.value("wall_seconds", 0.0);
  return o;
}

template <typename T>
struct SeedRun {
  SeedOutcome outcome;
  std::unique_ptr<Agent<T>> agent;
};

// Trains one seed to completion and writes its artifact directory:
// metrics.csv (optionally metrics.jsonl), checkpoint.bin, summary.json, and
// occupancy tables for the discrete games. A NumericError aborts training but
// still flushes artifacts, with the failure recorded in the summary.
template <typename T>
SeedRun<T> run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  fs::create_directories(dir);

  auto env = make_env(cfg.env, seed);
  ActionGrid grid(env->action_lower(), env->action_upper(), cfg.grid.bins);

  SeedRun<T> run;
  run.agent = std::make_unique<Agent<T>>(cfg.agent, grid, env->obs_dim(), seed);
  Agent<T>& agent = *run.agent;
  SeedOutcome& out = run.outcome;
  out.seed = seed;

  const std::uint64_t eval_seed = derive_seed(seed, kStreamEvalEnv);

  std::ofstream csv(dir / "metrics.csv");
  if (!csv) throw DataError("cannot write " + (dir / "metrics.csv").string());
  csv << kMetricsHeader << '\n';
  std::ofstream jsonl;
  if (cfg.run.metrics_jsonl) {
    jsonl.open(dir / "metrics.jsonl");
    if (!jsonl) throw DataError("cannot write " + (dir / "metrics.jsonl").string());
  }

  OccupancyTable occ;
  if (env->discrete_state_count() > 0)
    occ = OccupancyTable(env->discrete_state_count(), env->action_dims(), cfg.grid.bins);
  const std::set<long long> snaps(cfg.run.occupancy_snapshots.begin(),
                                  cfg.run.occupancy_snapshots.end());
  auto dump_occ = [&](const std::string& name) {
    if (!occ.active()) return;
    std::ofstream os(dir / name);
    occ.write_csv(os, [&](int s, const std::vector<int>& bins) {
      return agent.composed_q(env->canonical_obs(s), bins);
    });
  };

  std::vector<double> obs = env->reset();
  double ep_return = 0.0;
  double last_train_return = std::numeric_limits<double>::quiet_NaN();
  double loss_sum = 0.0, td_sum = 0.0, gn_sum = 0.0;
  long long learn_count = 0;

  for (long long t = 1; t <= cfg.run.total_env_steps && !out.numeric_failure; ++t) {
    const int state_id = env->discrete_state_count() > 0 ? env->discrete_state_id() : 0;
    const std::vector<int> bins = agent.act(obs);
    const std::vector<double> action = grid.action(bins);
    StepResult r = env->step(action);

    Transition tr;
    tr.state = obs;
    tr.action_indices = bins;
    tr.reward = r.reward;
    tr.next_state = r.next_obs;
    tr.terminal = r.terminal;
    tr.timeout = r.timeout;
    agent.observe(tr);
    occ.record(state_id, bins);

    ep_return += r.clean_reward;
    obs = std::move(r.next_obs);
    if (r.terminal || r.timeout) {
      last_train_return = ep_return;
      ep_return = 0.0;
      obs = env->reset();
    }

    if (t % cfg.agent.learner_period == 0) {
      try {
        const LearnerMetrics m = agent.learner_step();
        if (!m.skipped) {
          loss_sum += m.loss;
          td_sum += m.mean_abs_td;
          gn_sum += m.grad_norm;
          ++learn_count;
        }
      } catch (const NumericError& e) {
        out.numeric_failure = true;
        out.error = e.what();
      }
    }

    if (t % cfg.run.eval_interval == 0 || t == cfg.run.total_env_steps ||
        out.numeric_failure) {
      const EvalResult ev = evaluate(agent, cfg.env, cfg.run.eval_episodes, eval_seed);
      MetricsRow row;
      row.env_step = t;
      row.learner_step = agent.learner_steps();
      row.train_return = last_train_return;
      row.eval_return_mean = ev.mean;
      row.eval_return_std = ev.stddev;
      if (learn_count > 0) {
        row.loss = loss_sum / learn_count;
        row.mean_abs_td = td_sum / learn_count;
        row.grad_norm = gn_sum / learn_count;
      }
      row.epsilon = cfg.agent.epsilon;
      row.wall_seconds = elapsed();
      append_csv(csv, row);
      if (jsonl.is_open()) jsonl << row_json(row).dump() << '\n';
      loss_sum = td_sum = gn_sum = 0.0;
      learn_count = 0;

      out.final_eval_mean = ev.mean;
      out.final_eval_std = ev.stddev;
      out.final_eval_returns = ev.returns;
      if (cfg.run.early_stop_eval_return && ev.mean >= *cfg.run.early_stop_eval_return) {
        out.early_stopped = true;
        break;
      }
    }
    if (snaps.count(t)) dump_occ("occupancy_" + std::to_string(t) + ".csv");
  }

  out.env_steps = agent.env_steps();
  out.learner_steps = agent.learner_steps();

  dump_occ("occupancy_final.csv");
  {
    std::ofstream ck(dir / "checkpoint.bin", std::ios::binary);
    if (!ck) throw DataError("cannot write " + (dir / "checkpoint.bin").string());
    agent.save(ck);
  }
  out.wall_seconds = elapsed();
  write_summary(dir / "summary.json", cfg, out);
  return run;
}

inline fs::path resolve_output_dir(const ExperimentConfig& cfg) {
  fs::path dir = cfg.run.output_dir.empty() ? fs::path("results") / cfg.name
                                            : fs::path(cfg.run.output_dir);
  if (dir.is_relative())
    if (const char* root = std::getenv("DECQN_OUTPUT_ROOT")) dir = fs::path(root) / dir;
  return dir;
}

struct RunOptions {
  std::optional<std::uint64_t> only_seed;
  int jobs = 1;
  bool quiet = false;
};

template <typename T>
int run_all_seeds(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& log) {
  const fs::path outdir = resolve_output_dir(cfg);
  fs::create_directories(outdir);
  {
    std::ofstream os(outdir / "config.json");
    os << cfg.to_json().dump(2) << '\n';
  }
  {
    std::ofstream os(outdir / "oracle.json");
    os << compute_oracle(cfg).dump(2) << '\n';
  }

  std::vector<std::uint64_t> seeds =
      opt.only_seed ? std::vector<std::uint64_t>{*opt.only_seed} : cfg.run.seeds;

  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      const std::uint64_t seed = seeds[i];
      try {
        auto run = run_seed<T>(cfg, seed, outdir / ("seed_" + std::to_string(seed)));
        if (run.outcome.numeric_failure) failures.fetch_add(1);
        if (!opt.quiet) {
          std::lock_guard<std::mutex> lk(log_mu);
          log << cfg.name << " seed " << seed << ": eval "
              << run.outcome.final_eval_mean << " +/- " << run.outcome.final_eval_std
              << (run.outcome.early_stopped ? " (early stop)" : "")
              << (run.outcome.numeric_failure ? " NUMERIC FAILURE" : "") << " ["
              << fmt_csv(run.outcome.wall_seconds) << "s]\n";
        }
      } catch (const std::exception& e) {
        failures.fetch_add(1);
        std::lock_guard<std::mutex> lk(log_mu);
        log << cfg.name << " seed " << seed << ": FAILED: " << e.what() << '\n';
      }
    }
  };

  const int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(seeds.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return failures.load() ? 1 : 0;
}

inline int run_experiment(const ExperimentConfig& cfg, const RunOptions& opt,
                          std::ostream& log) {
  return cfg.precision == Precision::kF32 ? run_all_seeds<float>(cfg, opt, log)
                                          : run_all_seeds<double>(cfg, opt, log);
}

// Head widths and memory footprints of the decoupled vs enumerated critics as
// the action dimensionality grows. Enumerated sizes are tracked in long
// double because they overflow 64 bits within a few dozen dimensions.
struct ScalingRow {
  int n_a = 0;
  int n_b = 0;
  std::uint64_t decqn_outputs = 0;
  long double dqn_outputs = 0;
  std::uint64_t decqn_params = 0;
  long double dqn_params = 0;
  std::uint64_t decqn_train_bytes = 0;
  long double dqn_train_bytes = 0;
  bool dqn_over_budget = false;
};

inline std::vector<ScalingRow> scaling_report(int max_dims, int bins,
                                              std::uint64_t budget_bytes, int hidden,
                                              int obs_dim) {
  if (max_dims < 1 || bins < 2) throw ConfigError("scaling_report: need max_dims >= 1, bins >= 2");
  auto params_for = [&](long double width) {
    return static_cast<long double>(obs_dim) * hidden + 2.0L * hidden * hidden +
           static_cast<long double>(hidden) * width + 3.0L * hidden + width +
           2.0L * hidden;
  };
  // 4 network copies plus two Adam moment pairs, matching what training holds.
  const long double copies = 8.0L;
  std::vector<ScalingRow> rows;
  for (int n_a = 1; n_a <= max_dims; ++n_a) {
    ScalingRow r;
    r.n_a = n_a;
    r.n_b = bins;
    r.decqn_outputs = static_cast<std::uint64_t>(n_a) * bins;
    r.dqn_outputs = std::pow(static_cast<long double>(bins), n_a);
    r.decqn_params = static_cast<std::uint64_t>(params_for(r.decqn_outputs));
    r.dqn_params = params_for(r.dqn_outputs);
    r.decqn_train_bytes = static_cast<std::uint64_t>(r.decqn_params) * sizeof(float) *
                          static_cast<std::uint64_t>(copies);
    r.dqn_train_bytes = r.dqn_params * sizeof(float) * copies;
    r.dqn_over_budget = r.dqn_train_bytes > static_cast<long double>(budget_bytes);
    rows.push_back(r);
  }
  return rows;
}

inline std::string fmt_wide(long double v) {
  if (v <= 9.007199254740992e15L) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(v));
    return buf;
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6Lg", v);
  return buf;
}

inline void write_scaling_csv(std::ostream& os, const std::vector<ScalingRow>& rows) {
  os << "n_a,n_b,decqn_outputs,dqn_outputs,decqn_params,dqn_params,"
        "decqn_train_bytes,dqn_train_bytes,dqn_over_budget\n";
  for (const auto& r : rows)
    os << r.n_a << ',' << r.n_b << ',' << r.decqn_outputs << ','
       << fmt_wide(r.dqn_outputs) << ',' << r.decqn_params << ','
       << fmt_wide(r.dqn_params) << ',' << r.decqn_train_bytes << ','
       << fmt_wide(r.dqn_train_bytes) << ',' << (r.dqn_over_budget ? 1 : 0) << '\n';
}

// Rebuilds an agent in the config's layout and restores a checkpoint into it.
template <typename T>
Agent<T> agent_from_checkpoint(const ExperimentConfig& cfg, const fs::path& checkpoint) {
  auto env = make_env(cfg.env, 0);
  ActionGrid grid(env->action_lower(), env->action_upper(), cfg.grid.bins);
  Agent<T> agent(cfg.agent, grid, env->obs_dim(), 0);
  std::ifstream in(checkpoint, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + checkpoint.string() + "'");
  agent.load(in);
  return agent;
}

// Greedy accelerations over a velocity grid at the origin of the point-mass
// games; the sign structure of this table is the coordination evidence.
template <typename T>
void velocity_probe_csv(Agent<T>& agent, const ExperimentConfig& cfg, int points,
                        std::ostream& os) {
  if (cfg.env.name != "matrix_pointmass")
    throw ConfigError("probe-velocity: config must use the matrix_pointmass env");
  if (points < 2) throw ConfigError("probe-velocity: need at least 2 grid points");
  const double vb = cfg.env.pointmass.vel_bound;
  os << "vx,vy,ax,ay\n";
  for (int i = 0; i < points; ++i)
    for (int j = 0; j < points; ++j) {
      const double vx = -vb + 2.0 * vb * i / (points - 1);
      const double vy = -vb + 2.0 * vb * j / (points - 1);
      const std::vector<double> obs{0.0, 0.0, vx, vy};
      const auto bins = agent.greedy_action(obs);
      const auto a = agent.grid().action(bins);
      os << fmt_csv(vx) << ',' << fmt_csv(vy) << ',' << fmt_csv(a[0]) << ','
         << fmt_csv(a[1]) << '\n';
    }
}

}  // namespace decqn
