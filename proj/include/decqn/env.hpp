#pragma once

#include <span>
#include <vector>

#include "decqn/common.hpp"
#include "decqn/grid.hpp"

namespace decqn {

// Result of one environment step. `reward` is what the learner trains on;
// `clean_reward` is the noise-free score used for evaluation (identical unless
// a noise wrapper is active). `terminal` means the environment ended the
// episode; `timeout` means an external horizon cut it off, which the learner
// treats as still bootstrappable.
struct StepResult {
  std::vector<double> next_obs;
  double reward = 0.0;
  double clean_reward = 0.0;
  bool terminal = false;
  bool timeout = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual std::vector<double> reset() = 0;
  virtual StepResult step(std::span<const double> action) = 0;
  virtual int obs_dim() const = 0;
  virtual int action_dims() const = 0;
  // Bounds of the continuous action box, used to build the action grid.
  virtual std::vector<double> action_lower() const = 0;
  virtual std::vector<double> action_upper() const = 0;

  // Small discrete games expose their state for occupancy reports; 0 means
  // no discrete state structure.
  virtual int discrete_state_count() const { return 0; }
  virtual int discrete_state_id() const { return 0; }
  virtual std::vector<double> canonical_obs(int /*state_id*/) const { return {}; }
};

}  // namespace decqn
