#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "decqn/checkpoint.hpp"
#include "decqn/common.hpp"
#include "decqn/critic.hpp"
#include "decqn/grid.hpp"
#include "decqn/network.hpp"
#include "decqn/optim.hpp"
#include "decqn/replay.hpp"

namespace decqn {

// Maps between the environment's action bins (n_a dimensions, n_b bins each)
// and the learner's head layout. The decoupled learner keeps them identical;
// the enumerated baseline flattens everything into one dimension with
// n_b^n_a joint bins (mixed radix, dimension 0 most significant), which is
// what makes its head width explode with the dimension count.
class ActionCodec {
 public:
  static ActionCodec decoupled(int env_dims, int env_bins) {
    ActionCodec c;
    c.env_dims_ = env_dims;
    c.env_bins_ = env_bins;
    c.learn_dims_ = env_dims;
    c.learn_bins_ = env_bins;
    c.enumerated_ = false;
    return c;
  }

  static ActionCodec enumerated(int env_dims, int env_bins, std::uint64_t max_joint_bins) {
    ActionCodec c;
    c.env_dims_ = env_dims;
    c.env_bins_ = env_bins;
    c.learn_dims_ = 1;
    c.enumerated_ = true;
    std::uint64_t joint = 1;
    for (int j = 0; j < env_dims; ++j) {
      if (joint > max_joint_bins / static_cast<std::uint64_t>(env_bins))
        throw MemoryBudgetError(
            "memory budget exceeded: enumerated action head needs " +
            std::to_string(env_bins) + "^" + std::to_string(env_dims) +
            " outputs, budget allows " + std::to_string(max_joint_bins));
      joint *= static_cast<std::uint64_t>(env_bins);
    }
    if (joint > max_joint_bins)
      throw MemoryBudgetError("memory budget exceeded: enumerated action head needs " +
                              std::to_string(joint) + " outputs, budget allows " +
                              std::to_string(max_joint_bins));
    c.learn_bins_ = static_cast<int>(joint);
    return c;
  }

  bool enumerated_mode() const { return enumerated_; }
  int env_dims() const { return env_dims_; }
  int env_bins() const { return env_bins_; }
  int learn_dims() const { return learn_dims_; }
  int learn_bins() const { return learn_bins_; }

  void encode(std::span<const int> env_bins, std::vector<int>& learn) const {
    if (!enumerated_) {
      learn.assign(env_bins.begin(), env_bins.end());
      return;
    }
    std::uint64_t code = 0;
    for (int j = 0; j < env_dims_; ++j)
      code = code * static_cast<std::uint64_t>(env_bins_) + static_cast<std::uint64_t>(env_bins[j]);
    learn.assign(1, static_cast<int>(code));
  }

  void decode(std::span<const int> learn_bins, std::vector<int>& env) const {
    if (!enumerated_) {
      env.assign(learn_bins.begin(), learn_bins.end());
      return;
    }
    std::uint64_t code = static_cast<std::uint64_t>(learn_bins[0]);
    env.assign(env_dims_, 0);
    for (int j = env_dims_ - 1; j >= 0; --j) {
      env[j] = static_cast<int>(code % env_bins_);
      code /= env_bins_;
    }
  }

 private:
  int env_dims_ = 0, env_bins_ = 0;
  int learn_dims_ = 0, learn_bins_ = 0;
  bool enumerated_ = false;
};

struct AgentConfig {
  double gamma = 0.99;
  int n_step = 3;
  int batch_size = 256;
  double learning_rate = 1e-4;
  int hidden = 500;
  double grad_clip = 40.0;
  int target_update_period = 100;
  double priority_alpha = 0.6;
  double is_beta = 0.2;
  double epsilon = 0.1;
  std::size_t replay_capacity = 1000000;
  std::size_t min_fill = 1000;
  // Environment steps between learner steps; 1 keeps the classic one-to-one
  // cadence.
  int learner_period = 1;
  bool use_per = true;
  bool use_double_q = true;
  bool use_nstep = true;
  bool optimistic = false;
  Aggregation aggregation = Aggregation::kMean;
  LossMode loss_mode = LossMode::kJoint;
  // Enumerated joint-action baseline instead of the decoupled head.
  bool enumerated_dqn = false;
  std::uint64_t enumerated_budget_bytes = 2ull << 30;
  double huber_delta = 1.0;

  bool operator==(const AgentConfig&) const = default;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma must be in [0, 1]");
    if (n_step < 1) throw ConfigError("agent.n_step must be >= 1");
    if (batch_size < 1) throw ConfigError("agent.batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("agent.learning_rate must be positive");
    if (hidden < 1) throw ConfigError("agent.hidden must be >= 1");
    if (grad_clip < 0.0) throw ConfigError("agent.grad_clip must be >= 0");
    if (target_update_period < 1)
      throw ConfigError("agent.target_update_period must be >= 1");
    if (!(priority_alpha >= 0.0)) throw ConfigError("agent.priority_alpha must be >= 0");
    if (!(is_beta >= 0.0)) throw ConfigError("agent.is_beta must be >= 0");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("agent.epsilon must be in [0, 1]");
    if (replay_capacity < 1) throw ConfigError("agent.replay_capacity must be >= 1");
    if (learner_period < 1) throw ConfigError("agent.learner_period must be >= 1");
    if (!(huber_delta > 0.0)) throw ConfigError("agent.huber_delta must be positive");
  }
};

struct LearnerMetrics {
  bool skipped = true;
  double loss = 0.0;
  double mean_abs_td = 0.0;
  double grad_norm = 0.0;  // pre-clip, summed over both critics
};

// The full value learner: twin critics with target copies, prioritized n-step
// replay, epsilon-greedy behavior. Templated on the training scalar type.
template <typename T>
class Agent {
 public:
  Agent(AgentConfig cfg, ActionGrid grid, int obs_dim, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        grid_(std::move(grid)),
        obs_dim_(obs_dim),
        codec_(make_codec(cfg_, grid_)),
        folder_(cfg_.use_nstep ? cfg_.n_step : 1, cfg_.gamma),
        tree_(cfg_.replay_capacity),
        rng_explore_(derive_seed(seed, kStreamExploration)),
        rng_replay_(derive_seed(seed, kStreamReplay)) {
    cfg_.validate();
    if (obs_dim_ < 1) throw ConfigError("Agent: observation dimension must be >= 1");
    const MlpShape shape{obs_dim_, cfg_.hidden,
                         codec_.learn_dims() * codec_.learn_bins()};
    check_budget(shape);
    std::mt19937_64 rng_init(derive_seed(seed, kStreamNetworkInit));
    online1_ = init_params<T>(shape, rng_init);
    online2_ = init_params<T>(shape, rng_init);
    target1_ = online1_;
    target2_ = online2_;
    adam1_ = AdamState<T>::init(shape, cfg_.learning_rate);
    adam2_ = AdamState<T>::init(shape, cfg_.learning_rate);
    grads1_ = MlpParams<T>::zeros(shape);
    grads2_ = MlpParams<T>::zeros(shape);
  }

  const AgentConfig& config() const { return cfg_; }
  const ActionGrid& grid() const { return grid_; }
  const ActionCodec& codec() const { return codec_; }
  long long env_steps() const { return env_steps_; }
  long long learner_steps() const { return learner_steps_; }
  std::size_t replay_size() const { return tree_.size(); }
  const SumTree& replay() const { return tree_; }

  // Behavior policy: with probability epsilon a uniform random bin per
  // learner dimension, otherwise greedy. Returns environment-layout bins.
  std::vector<int> act(std::span<const double> obs) { return act_eps(obs, cfg_.epsilon); }

  // Greedy action; draws nothing from the exploration stream, so evaluation
  // rollouts never perturb training randomness.
  std::vector<int> greedy_action(std::span<const double> obs) {
    forward_single(obs);
    std::vector<int> learn(codec_.learn_dims());
    greedy_into(std::span<int>(learn));
    std::vector<int> env_bins;
    codec_.decode(learn, env_bins);
    return env_bins;
  }

  // Greedy actions for several observations at once (one forward pass for the
  // whole batch). Used by evaluation rollouts that advance parallel episodes
  // in lockstep.
  std::vector<std::vector<int>> greedy_actions(
      const std::vector<std::vector<double>>& obs) {
    const int rows = static_cast<int>(obs.size());
    batch_in_.resize(rows, obs_dim_);
    for (int r = 0; r < rows; ++r) {
      if (static_cast<int>(obs[r].size()) != obs_dim_)
        throw ConfigError("Agent: observation has wrong dimensionality");
      for (int c = 0; c < obs_dim_; ++c) batch_in_(r, c) = static_cast<T>(obs[r][c]);
    }
    Mat<T> out1 = mlp_forward(online1_, batch_in_);
    Mat<T> out2;
    if (cfg_.use_double_q) out2 = mlp_forward(online2_, batch_in_);

    std::vector<std::vector<int>> actions(rows);
    std::vector<int> learn(codec_.learn_dims());
    for (int r = 0; r < rows; ++r) {
      const auto v1 = utility_view(out1, r, codec_.learn_dims(), codec_.learn_bins());
      if (cfg_.use_double_q) {
        const auto v2 = utility_view(out2, r, codec_.learn_dims(), codec_.learn_bins());
        double_q_select_into(v1, v2, std::span<int>(learn));
      } else {
        decoupled_argmax_into(v1, std::span<int>(learn));
      }
      codec_.decode(learn, actions[r]);
    }
    return actions;
  }

  // The epsilon draw is independent per learner dimension: a dimension can
  // explore while the others follow their greedy choice, which is what lets a
  // policy shift in one dimension appear in the data the others learn from.
  std::vector<int> act_eps(std::span<const double> obs, double epsilon) {
    if (epsilon <= 0.0) return greedy_action(obs);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> bin(0, codec_.learn_bins() - 1);
    const int dims = codec_.learn_dims();
    std::vector<char> explore(dims);
    bool all_explore = true;
    for (int j = 0; j < dims; ++j) {
      explore[j] = unit(rng_explore_) < epsilon ? 1 : 0;
      all_explore = all_explore && explore[j] != 0;
    }
    std::vector<int> learn(dims);
    if (!all_explore) {
      forward_single(obs);
      greedy_into(std::span<int>(learn));
    }
    for (int j = 0; j < dims; ++j)
      if (explore[j] != 0) learn[j] = bin(rng_explore_);
    std::vector<int> env_bins;
    codec_.decode(learn, env_bins);
    return env_bins;
  }

  // Records one environment transition (environment-layout action bins).
  void observe(const Transition& tr) {
    Transition stored = tr;
    codec_.encode(tr.action_indices, stored.action_indices);
    for (NStepTransition& rec : folder_.push(std::move(stored)))
      tree_.add(std::move(rec));
    ++env_steps_;
  }

  bool learner_ready() const {
    return tree_.size() >= std::max<std::size_t>(cfg_.min_fill, cfg_.batch_size);
  }

  LearnerMetrics learner_step() {
    LearnerMetrics m;
    if (!learner_ready()) return m;
    const double alpha = cfg_.use_per ? cfg_.priority_alpha : 0.0;
    const double beta = cfg_.use_per ? cfg_.is_beta : 0.0;
    auto samples = tree_.sample(cfg_.batch_size, alpha, beta, rng_replay_);

    batch_items_.clear();
    weights_.clear();
    leaves_.clear();
    for (const auto& s : samples) {
      batch_items_.push_back(&tree_.item(s.leaf));
      weights_.push_back(s.is_weight);
      leaves_.push_back(s.leaf);
    }

    TdLossSpec<T> spec;
    spec.n_a = codec_.learn_dims();
    spec.n_b = codec_.learn_bins();
    spec.aggregation = cfg_.aggregation;
    spec.loss_mode = cfg_.loss_mode;
    spec.delta = static_cast<T>(cfg_.huber_delta);
    spec.gamma = static_cast<T>(cfg_.gamma);
    spec.use_double_q = cfg_.use_double_q;
    spec.optimistic = cfg_.optimistic;

    auto res = td_loss<T>(batch_items_, online1_, online2_, target1_, target2_,
                          weights_, spec);
    if (!std::isfinite(static_cast<double>(res.loss)))
      throw NumericError("learner_step: non-finite loss at learner step " +
                         std::to_string(learner_steps_));

    mlp_backward(online1_, res.cache1, res.dout1, grads1_);
    double norm = clip_global_norm(grads1_, cfg_.grad_clip);
    adam_step(adam1_, online1_, grads1_);
    if (cfg_.use_double_q) {
      mlp_backward(online2_, res.cache2, res.dout2, grads2_);
      norm += clip_global_norm(grads2_, cfg_.grad_clip);
      adam_step(adam2_, online2_, grads2_);
    }

    tree_.update(leaves_, res.td_abs);

    m.skipped = false;
    m.loss = static_cast<double>(res.loss);
    double td = 0.0;
    for (double t : res.td_abs) td += t;
    m.mean_abs_td = td / res.td_abs.size();
    m.grad_norm = norm;

    ++learner_steps_;
    if (learner_steps_ % cfg_.target_update_period == 0) sync_targets();
    return m;
  }

  // Hard copy of the online critics into the targets.
  void sync_targets() {
    target1_ = online1_;
    target2_ = online2_;
  }

  // Composed value of one environment-layout action under online critic 1
  // (averaged with critic 2 when twin critics are on).
  double composed_q(std::span<const double> obs, std::span<const int> env_bins) {
    forward_single(obs);
    std::vector<int> learn;
    codec_.encode(env_bins, learn);
    const auto v1 = utility_view(single_out1_, 0, codec_.learn_dims(), codec_.learn_bins());
    double q = compose_q(v1, std::span<const int>(learn), cfg_.aggregation);
    if (cfg_.use_double_q) {
      const auto v2 =
          utility_view(single_out2_, 0, codec_.learn_dims(), codec_.learn_bins());
      q = 0.5 * (q + compose_q(v2, std::span<const int>(learn), cfg_.aggregation));
    }
    return q;
  }

  // Raw utility table of online critic 1 for one observation, row-major
  // [learn_dims x learn_bins].
  std::vector<double> utility_table(std::span<const double> obs) {
    forward_single(obs);
    std::vector<double> out(single_out1_.cols());
    for (int c = 0; c < single_out1_.cols(); ++c)
      out[c] = static_cast<double>(single_out1_(0, c));
    return out;
  }

  void save(std::ostream& os) const {
    write_header<T>(os);
    io::write_pod<std::int32_t>(os, obs_dim_);
    io::write_pod<std::int32_t>(os, codec_.env_dims());
    io::write_pod<std::int32_t>(os, codec_.env_bins());
    io::write_pod<std::uint8_t>(os, codec_.enumerated_mode() ? 1 : 0);
    io::write_pod<std::int64_t>(os, env_steps_);
    io::write_pod<std::int64_t>(os, learner_steps_);
    write_params(os, online1_);
    write_params(os, online2_);
    write_params(os, target1_);
    write_params(os, target2_);
    write_adam(os, adam1_);
    write_adam(os, adam2_);
    if (!os) throw DataError("Agent::save: stream write failed");
  }

  void load(std::istream& is) {
    read_header<T>(is);
    const auto obs_dim = io::read_pod<std::int32_t>(is);
    const auto env_dims = io::read_pod<std::int32_t>(is);
    const auto env_bins = io::read_pod<std::int32_t>(is);
    const auto enumerated = io::read_pod<std::uint8_t>(is);
    if (obs_dim != obs_dim_ || env_dims != codec_.env_dims() ||
        env_bins != codec_.env_bins() ||
        (enumerated != 0) != codec_.enumerated_mode())
      throw DataError("Agent::load: checkpoint was written for a different task layout");
    env_steps_ = io::read_pod<std::int64_t>(is);
    learner_steps_ = io::read_pod<std::int64_t>(is);
    read_params(is, online1_);
    read_params(is, online2_);
    read_params(is, target1_);
    read_params(is, target2_);
    read_adam(is, adam1_);
    read_adam(is, adam2_);
  }

 private:
  static ActionCodec make_codec(const AgentConfig& cfg, const ActionGrid& grid) {
    if (!cfg.enumerated_dqn) return ActionCodec::decoupled(grid.dims(), grid.bins());
    // Head width the byte budget allows: each output unit costs one weight
    // column (hidden) plus a bias, per critic pair (4 networks).
    const std::uint64_t per_unit =
        4ull * (static_cast<std::uint64_t>(cfg.hidden) + 1) * sizeof(T);
    return ActionCodec::enumerated(grid.dims(), grid.bins(),
                                   cfg.enumerated_budget_bytes / per_unit);
  }

  void check_budget(const MlpShape& shape) {
    const std::uint64_t params =
        static_cast<std::uint64_t>(shape.in) * shape.hidden +
        2ull * shape.hidden * shape.hidden +
        static_cast<std::uint64_t>(shape.hidden) * shape.out + 3ull * shape.hidden +
        shape.out + 2ull * shape.hidden;
    // 4 networks + 2 optimizer moment pairs.
    const std::uint64_t bytes = params * sizeof(T) * 8ull;
    if (bytes > cfg_.enumerated_budget_bytes)
      throw MemoryBudgetError("memory budget exceeded: networks need " +
                              std::to_string(bytes) + " bytes, budget is " +
                              std::to_string(cfg_.enumerated_budget_bytes));
  }

  void forward_single(std::span<const double> obs) {
    if (static_cast<int>(obs.size()) != obs_dim_)
      throw ConfigError("Agent: observation has wrong dimensionality");
    single_in_.resize(1, obs_dim_);
    for (int c = 0; c < obs_dim_; ++c) single_in_(0, c) = static_cast<T>(obs[c]);
    single_out1_ = mlp_forward(online1_, single_in_);
    if (cfg_.use_double_q) single_out2_ = mlp_forward(online2_, single_in_);
  }

  void greedy_into(std::span<int> learn) {
    const auto v1 = utility_view(single_out1_, 0, codec_.learn_dims(), codec_.learn_bins());
    if (cfg_.use_double_q) {
      const auto v2 =
          utility_view(single_out2_, 0, codec_.learn_dims(), codec_.learn_bins());
      double_q_select_into(v1, v2, learn);
    } else {
      decoupled_argmax_into(v1, learn);
    }
  }

  AgentConfig cfg_;
  ActionGrid grid_;
  int obs_dim_;
  ActionCodec codec_;
  NStepFolder folder_;
  SumTree tree_;
  std::mt19937_64 rng_explore_;
  std::mt19937_64 rng_replay_;

  MlpParams<T> online1_, online2_, target1_, target2_;
  AdamState<T> adam1_, adam2_;
  MlpParams<T> grads1_, grads2_;

  Mat<T> single_in_, single_out1_, single_out2_, batch_in_;
  std::vector<const NStepTransition*> batch_items_;
  std::vector<double> weights_;
  std::vector<std::size_t> leaves_;

  long long env_steps_ = 0;
  long long learner_steps_ = 0;
};

}  // namespace decqn
