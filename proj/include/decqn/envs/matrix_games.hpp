#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "decqn/common.hpp"
#include "decqn/env.hpp"

namespace decqn::envs {

// Cooperative payoff table indexed by (agent-1 bin, agent-2 bin). The values
// are plain configuration data; optimal returns are always computed by an
// oracle, never assumed from these defaults.
using PayoffMatrix = std::vector<std::vector<double>>;

inline void validate_payoff(const PayoffMatrix& m, const std::string& what) {
  if (m.empty()) throw ConfigError(what + ": payoff matrix is empty");
  const std::size_t n = m.size();
  for (const auto& row : m) {
    if (row.size() != n) throw ConfigError(what + ": payoff matrix must be square");
    for (double v : row)
      if (!std::isfinite(v)) throw ConfigError(what + ": payoff entries must be finite");
  }
}

// Classical cooperative matrices used as documented defaults.
inline PayoffMatrix default_penalty_payoff(double k) {
  return {{10, 0, k}, {0, 2, 0}, {k, 0, 10}};
}

inline PayoffMatrix default_climbing_payoff() {
  return {{11, -30, 0}, {-30, 7, 6}, {0, 0, 5}};
}

inline PayoffMatrix default_two_step_state2() { return {{7, 7}, {7, 7}}; }
inline PayoffMatrix default_two_step_state3() { return {{0, 1}, {1, 8}}; }

// Two-agent, three-state coordination game. From state 1 the first agent's
// action picks the successor (bin 0 -> state 2, bin 1 -> state 3) with no
// reward; states 2 and 3 pay out their 2x2 matrix and terminate. Observation
// is the one-hot global state.
class TwoStepGame final : public Env {
 public:
  TwoStepGame(PayoffMatrix state2, PayoffMatrix state3)
      : payoff2_(std::move(state2)), payoff3_(std::move(state3)) {
    validate_payoff(payoff2_, "TwoStepGame state2");
    validate_payoff(payoff3_, "TwoStepGame state3");
    if (payoff2_.size() != 2 || payoff3_.size() != 2)
      throw ConfigError("TwoStepGame: payoff matrices must be 2x2");
  }

  std::vector<double> reset() override {
    state_ = 1;
    return obs();
  }

  StepResult step(std::span<const double> action) override {
    const auto bins = grid().indices(action);
    StepResult r;
    if (state_ == 1) {
      state_ = bins[0] == 0 ? 2 : 3;
      r.reward = 0.0;
    } else {
      const PayoffMatrix& m = state_ == 2 ? payoff2_ : payoff3_;
      r.reward = m[bins[0]][bins[1]];
      r.terminal = true;
    }
    r.clean_reward = r.reward;
    r.next_obs = obs();
    return r;
  }

  int obs_dim() const override { return 3; }
  int action_dims() const override { return 2; }
  std::vector<double> action_lower() const override { return {-1.0, -1.0}; }
  std::vector<double> action_upper() const override { return {1.0, 1.0}; }

  int discrete_state_count() const override { return 3; }
  int discrete_state_id() const override { return state_ - 1; }
  std::vector<double> canonical_obs(int state_id) const override {
    std::vector<double> o(3, 0.0);
    o[state_id] = 1.0;
    return o;
  }

  const PayoffMatrix& payoff_state2() const { return payoff2_; }
  const PayoffMatrix& payoff_state3() const { return payoff3_; }

 private:
  const ActionGrid& grid() const {
    static const ActionGrid g = ActionGrid::symmetric(2, 1.0, 2);
    return g;
  }

  std::vector<double> obs() const {
    std::vector<double> o(3, 0.0);
    o[state_ - 1] = 1.0;
    return o;
  }

  PayoffMatrix payoff2_, payoff3_;
  int state_ = 1;
};

// Single-shot cooperative matrix game: constant observation, one joint action,
// immediate payoff, episode over.
class MatrixOneStepEnv final : public Env {
 public:
  explicit MatrixOneStepEnv(PayoffMatrix payoff) : payoff_(std::move(payoff)) {
    validate_payoff(payoff_, "MatrixOneStepEnv");
    grid_ = ActionGrid::symmetric(2, 1.0, static_cast<int>(payoff_.size()));
  }

  std::vector<double> reset() override { return obs(); }

  StepResult step(std::span<const double> action) override {
    const auto bins = grid_.indices(action);
    StepResult r;
    r.reward = payoff_[bins[0]][bins[1]];
    r.clean_reward = r.reward;
    r.terminal = true;
    r.next_obs = obs();
    return r;
  }

  int obs_dim() const override { return 4; }
  int action_dims() const override { return 2; }
  std::vector<double> action_lower() const override { return {-1.0, -1.0}; }
  std::vector<double> action_upper() const override { return {1.0, 1.0}; }

  int discrete_state_count() const override { return 1; }
  int discrete_state_id() const override { return 0; }
  std::vector<double> canonical_obs(int) const override { return obs(); }

  const PayoffMatrix& payoff() const { return payoff_; }

 private:
  std::vector<double> obs() const { return std::vector<double>(4, 0.0); }

  PayoffMatrix payoff_;
  ActionGrid grid_;
};

enum class PointMassReward { kAction, kState };

struct PointMassConfig {
  double dt = 0.05;
  double pos_bound = 2.0;
  double vel_bound = 1.0;
  int horizon = 1000;
  PointMassReward reward = PointMassReward::kAction;
  // State-reward variant: positions partition into 3 zones per axis at
  // +/- zone_threshold; per-step reward = payoff[zone_x][zone_y] * scale.
  double zone_threshold = 0.5;
  double state_reward_scale = 0.01;
  // Uniform half-range of the reset velocity; 0 resets to exact zero
  // velocity. Position always resets to the origin.
  double reset_vel = 0.0;
  // Fraction of episodes whose reset velocity is actually scattered; the
  // rest start from exact zero velocity. Lets training mix a concentrated
  // start distribution with box-covering ones.
  double reset_vel_prob = 1.0;

  bool operator==(const PointMassConfig&) const = default;
};

// The matrix games wrapped in 2-D point-mass dynamics: each action dimension
// is an acceleration command along one axis, integrated with semi-implicit
// Euler under position/velocity clamps. Episodes run a fixed horizon and end
// in a timeout, never a terminal.
class PointMassMatrixEnv final : public Env {
 public:
  PointMassMatrixEnv(PayoffMatrix payoff, PointMassConfig cfg, std::uint64_t seed)
      : payoff_(std::move(payoff)), cfg_(cfg), rng_(derive_seed(seed, kStreamEnv)) {
    validate_payoff(payoff_, "PointMassMatrixEnv");
    if (cfg_.horizon < 1) throw ConfigError("PointMassMatrixEnv: horizon must be >= 1");
    if (!(cfg_.dt > 0.0)) throw ConfigError("PointMassMatrixEnv: dt must be positive");
    if (!(cfg_.reset_vel >= 0.0 && cfg_.reset_vel <= cfg_.vel_bound))
      throw ConfigError("PointMassMatrixEnv: reset_vel must be in [0, vel_bound]");
    if (!(cfg_.reset_vel_prob >= 0.0 && cfg_.reset_vel_prob <= 1.0))
      throw ConfigError("PointMassMatrixEnv: reset_vel_prob must be in [0, 1]");
    grid_ = ActionGrid::symmetric(2, 1.0, static_cast<int>(payoff_.size()));
  }

  std::vector<double> reset() override {
    x_ = y_ = vx_ = vy_ = 0.0;
    if (cfg_.reset_vel > 0.0) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      if (unit(rng_) < cfg_.reset_vel_prob) {
        std::uniform_real_distribution<double> d(-cfg_.reset_vel, cfg_.reset_vel);
        vx_ = d(rng_);
        vy_ = d(rng_);
      }
    }
    t_ = 0;
    return obs();
  }

  StepResult step(std::span<const double> action) override {
    const auto bins = grid_.indices(action);
    vx_ = std::clamp(vx_ + action[0] * cfg_.dt, -cfg_.vel_bound, cfg_.vel_bound);
    vy_ = std::clamp(vy_ + action[1] * cfg_.dt, -cfg_.vel_bound, cfg_.vel_bound);
    x_ = std::clamp(x_ + vx_ * cfg_.dt, -cfg_.pos_bound, cfg_.pos_bound);
    y_ = std::clamp(y_ + vy_ * cfg_.dt, -cfg_.pos_bound, cfg_.pos_bound);
    ++t_;

    StepResult r;
    if (cfg_.reward == PointMassReward::kAction) {
      r.reward = payoff_[bins[0]][bins[1]];
    } else {
      r.reward = payoff_[zone(x_)][zone(y_)] * cfg_.state_reward_scale;
    }
    r.clean_reward = r.reward;
    r.timeout = t_ >= cfg_.horizon;
    r.next_obs = obs();
    return r;
  }

  int obs_dim() const override { return 4; }
  int action_dims() const override { return 2; }
  std::vector<double> action_lower() const override { return {-1.0, -1.0}; }
  std::vector<double> action_upper() const override { return {1.0, 1.0}; }

  // Zone cells double as a coarse discrete state for occupancy reports.
  int discrete_state_count() const override { return 9; }
  int discrete_state_id() const override { return zone(x_) * 3 + zone(y_); }
  std::vector<double> canonical_obs(int state_id) const override {
    static constexpr double centers[3] = {-1.25, 0.0, 1.25};
    return {centers[state_id / 3], centers[state_id % 3], 0.0, 0.0};
  }

  int zone(double p) const {
    if (p < -cfg_.zone_threshold) return 0;
    if (p > cfg_.zone_threshold) return 2;
    return 1;
  }

  const PayoffMatrix& payoff() const { return payoff_; }
  const PointMassConfig& config() const { return cfg_; }

 private:
  std::vector<double> obs() const { return {x_, y_, vx_, vy_}; }

  PayoffMatrix payoff_;
  PointMassConfig cfg_;
  ActionGrid grid_;
  std::mt19937_64 rng_;
  double x_ = 0, y_ = 0, vx_ = 0, vy_ = 0;
  int t_ = 0;
};

}  // namespace decqn::envs
