#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "decqn/common.hpp"
#include "decqn/env.hpp"

namespace decqn::envs {

struct CartpoleConfig {
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double gravity = 9.81;
  double force_max = 10.0;
  double dt = 0.01;
  // The chosen force is held for this many physics steps per env step.
  int action_repeat = 2;
  int horizon = 1000;
  // > 1 splits the total force across several bounded actuators whose
  // commands sum; the physics is unchanged but the action space gains
  // dimensions.
  int actuators = 1;
  // Reward (1 + cos(theta))/2, optionally scaled by max(0, 1 - (x/x_limit)^2)
  // to keep the cart centered.
  bool center_shaping = true;
  double x_limit = 2.4;
  // Initial pole angle is hanging (pi) plus uniform noise of this magnitude.
  double reset_noise = 0.05;

  bool operator==(const CartpoleConfig&) const = default;
};

// Cart-pole swingup: the pole starts hanging and must be swung up and
// balanced. Angle is measured from upright and wrapped to (-pi, pi]. There is
// no terminal state, only the horizon timeout, and no track limit; the
// centering term keeps drifting unprofitable.
class CartpoleSwingupEnv final : public Env {
 public:
  CartpoleSwingupEnv(CartpoleConfig cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(derive_seed(seed, kStreamEnv)) {
    if (cfg_.actuators < 1) throw ConfigError("CartpoleSwingupEnv: actuators must be >= 1");
    if (cfg_.horizon < 1) throw ConfigError("CartpoleSwingupEnv: horizon must be >= 1");
    if (!(cfg_.dt > 0.0)) throw ConfigError("CartpoleSwingupEnv: dt must be positive");
    if (cfg_.action_repeat < 1)
      throw ConfigError("CartpoleSwingupEnv: action_repeat must be >= 1");
    if (!(cfg_.force_max > 0.0))
      throw ConfigError("CartpoleSwingupEnv: force_max must be positive");
  }

  std::vector<double> reset() override {
    x_ = 0.0;
    xdot_ = 0.0;
    theta_ = std::numbers::pi;
    thetadot_ = 0.0;
    if (cfg_.reset_noise > 0.0) {
      std::uniform_real_distribution<double> d(-cfg_.reset_noise, cfg_.reset_noise);
      theta_ = wrap_angle(theta_ + d(rng_));
    }
    t_ = 0;
    return obs();
  }

  StepResult step(std::span<const double> action) override {
    double force = 0.0;
    for (double a : action) force += a;
    const double cap = cfg_.force_max;
    if (force > cap) force = cap;
    if (force < -cap) force = -cap;

    for (int k = 0; k < cfg_.action_repeat; ++k) rk4_step(force);
    theta_ = wrap_angle(theta_);
    ++t_;

    StepResult r;
    r.reward = 0.5 * (1.0 + std::cos(theta_));
    if (cfg_.center_shaping) {
      const double c = 1.0 - (x_ / cfg_.x_limit) * (x_ / cfg_.x_limit);
      r.reward *= c > 0.0 ? c : 0.0;
    }
    r.clean_reward = r.reward;
    r.timeout = t_ >= cfg_.horizon;
    r.next_obs = obs();
    return r;
  }

  int obs_dim() const override { return 5; }
  int action_dims() const override { return cfg_.actuators; }
  std::vector<double> action_lower() const override {
    return std::vector<double>(cfg_.actuators, -cfg_.force_max / cfg_.actuators);
  }
  std::vector<double> action_upper() const override {
    return std::vector<double>(cfg_.actuators, cfg_.force_max / cfg_.actuators);
  }

  // Direct state access for physics tests.
  void set_state(double x, double xdot, double theta, double thetadot) {
    x_ = x;
    xdot_ = xdot;
    theta_ = theta;
    thetadot_ = thetadot;
    t_ = 0;
  }
  double x() const { return x_; }
  double xdot() const { return xdot_; }
  double theta() const { return theta_; }
  double thetadot() const { return thetadot_; }

  // Total mechanical energy of the rod-pendulum-on-cart model; conserved by
  // the unforced, undamped dynamics.
  double energy() const {
    const double mc = cfg_.cart_mass, mp = cfg_.pole_mass, l = cfg_.pole_half_length;
    return 0.5 * (mc + mp) * xdot_ * xdot_ +
           mp * l * xdot_ * thetadot_ * std::cos(theta_) +
           (2.0 / 3.0) * mp * l * l * thetadot_ * thetadot_ +
           mp * cfg_.gravity * l * std::cos(theta_);
  }

  const CartpoleConfig& config() const { return cfg_; }

  static double wrap_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
  }

 private:
  struct Deriv {
    double dx, dxdot, dtheta, dthetadot;
  };

  // Pole as a uniform rod pivoting on the cart, angle measured from upright.
  Deriv dynamics(double xdot, double theta, double thetadot, double force) const {
    const double mc = cfg_.cart_mass, mp = cfg_.pole_mass, l = cfg_.pole_half_length;
    const double total = mc + mp;
    const double sin_t = std::sin(theta), cos_t = std::cos(theta);
    const double tmp = (force + mp * l * thetadot * thetadot * sin_t) / total;
    const double theta_acc = (cfg_.gravity * sin_t - cos_t * tmp) /
                             (l * (4.0 / 3.0 - mp * cos_t * cos_t / total));
    const double x_acc = tmp - mp * l * theta_acc * cos_t / total;
    return {xdot, x_acc, thetadot, theta_acc};
  }

  void rk4_step(double force) {
    const double h = cfg_.dt;
    const Deriv k1 = dynamics(xdot_, theta_, thetadot_, force);
    const Deriv k2 = dynamics(xdot_ + 0.5 * h * k1.dxdot, theta_ + 0.5 * h * k1.dtheta,
                              thetadot_ + 0.5 * h * k1.dthetadot, force);
    const Deriv k3 = dynamics(xdot_ + 0.5 * h * k2.dxdot, theta_ + 0.5 * h * k2.dtheta,
                              thetadot_ + 0.5 * h * k2.dthetadot, force);
    const Deriv k4 = dynamics(xdot_ + h * k3.dxdot, theta_ + h * k3.dtheta,
                              thetadot_ + h * k3.dthetadot, force);
    x_ += h / 6.0 * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
    xdot_ += h / 6.0 * (k1.dxdot + 2 * k2.dxdot + 2 * k3.dxdot + k4.dxdot);
    theta_ += h / 6.0 * (k1.dtheta + 2 * k2.dtheta + 2 * k3.dtheta + k4.dtheta);
    thetadot_ += h / 6.0 * (k1.dthetadot + 2 * k2.dthetadot + 2 * k3.dthetadot + k4.dthetadot);
  }

  std::vector<double> obs() const {
    return {x_, xdot_, std::cos(theta_), std::sin(theta_), thetadot_};
  }

  CartpoleConfig cfg_;
  std::mt19937_64 rng_;
  double x_ = 0, xdot_ = 0, theta_ = std::numbers::pi, thetadot_ = 0;
  int t_ = 0;
};

}  // namespace decqn::envs
