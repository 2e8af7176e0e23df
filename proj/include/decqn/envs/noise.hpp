#pragma once

#include <memory>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "decqn/common.hpp"
#include "decqn/env.hpp"

namespace decqn::envs {

// Adds i.i.d. Gaussian noise to observations and/or rewards. The wrapped
// environment's state evolution is untouched, and the clean reward stays
// visible so evaluation can score the true return.
class GaussianNoiseEnv final : public Env {
 public:
  GaussianNoiseEnv(std::unique_ptr<Env> inner, double sigma_obs, double sigma_rew,
                   std::uint64_t seed)
      : inner_(std::move(inner)),
        sigma_obs_(sigma_obs),
        sigma_rew_(sigma_rew),
        rng_(derive_seed(seed, kStreamNoise)) {
    if (sigma_obs_ < 0.0 || sigma_rew_ < 0.0)
      throw ConfigError("GaussianNoiseEnv: noise sigmas must be >= 0");
  }

  std::vector<double> reset() override {
    auto obs = inner_->reset();
    perturb_obs(obs);
    return obs;
  }

  StepResult step(std::span<const double> action) override {
    StepResult r = inner_->step(action);
    perturb_obs(r.next_obs);
    if (sigma_rew_ > 0.0) {
      std::normal_distribution<double> g(0.0, sigma_rew_);
      r.reward += g(rng_);
    }
    return r;
  }

  int obs_dim() const override { return inner_->obs_dim(); }
  int action_dims() const override { return inner_->action_dims(); }
  std::vector<double> action_lower() const override { return inner_->action_lower(); }
  std::vector<double> action_upper() const override { return inner_->action_upper(); }
  int discrete_state_count() const override { return inner_->discrete_state_count(); }
  int discrete_state_id() const override { return inner_->discrete_state_id(); }
  std::vector<double> canonical_obs(int state_id) const override {
    return inner_->canonical_obs(state_id);
  }

  Env& inner() { return *inner_; }

 private:
  void perturb_obs(std::vector<double>& obs) {
    if (sigma_obs_ <= 0.0) return;
    std::normal_distribution<double> g(0.0, sigma_obs_);
    for (double& v : obs) v += g(rng_);
  }

  std::unique_ptr<Env> inner_;
  double sigma_obs_, sigma_rew_;
  std::mt19937_64 rng_;
};

}  // namespace decqn::envs
