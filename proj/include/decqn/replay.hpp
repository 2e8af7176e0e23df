#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include "decqn/common.hpp"

namespace decqn {

// One environment step as stored by the agent. Action is kept as grid bin
// indices (learner layout); terminal marks environment termination, timeout
// marks an externally imposed horizon. A timeout still bootstraps.
struct Transition {
  std::vector<double> state;
  std::vector<int> action_indices;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
  bool timeout = false;
};

// An n-step record: first state/action of the window, discounted reward sum
// over the window, the state bootstrapped from, the realized window length
// (shorter than n at episode ends), and a bootstrap mask that is zero exactly
// when the window ends in an environment terminal.
struct NStepTransition {
  std::vector<double> state;
  std::vector<int> action_indices;
  double accumulated_reward = 0.0;
  std::vector<double> bootstrap_state;
  int effective_n = 1;
  double bootstrap_mask = 1.0;
};

// Folds raw transitions into n-step records. Emits one record per pushed
// transition once the window is full, and flushes progressively shorter
// windows when an episode ends (terminal or timeout) so no experience is
// dropped. Windows never span episode boundaries.
class NStepFolder {
 public:
  NStepFolder(int n, double gamma) : n_(n), gamma_(gamma) {
    if (n_ < 1) throw ConfigError("NStepFolder: n must be >= 1");
    if (!(gamma_ >= 0.0) || gamma_ > 1.0)
      throw ConfigError("NStepFolder: gamma must be in [0, 1]");
  }

  int n() const { return n_; }

  std::vector<NStepTransition> push(Transition tr) {
    const bool episode_end = tr.terminal || tr.timeout;
    window_.push_back(std::move(tr));
    std::vector<NStepTransition> out;
    if (static_cast<int>(window_.size()) == n_ && !episode_end) {
      out.push_back(fold_from(0));
      window_.pop_front();
    } else if (episode_end) {
      for (std::size_t i = 0; i < window_.size(); ++i) out.push_back(fold_from(i));
      window_.clear();
    }
    return out;
  }

  void reset() { window_.clear(); }
  std::size_t pending() const { return window_.size(); }

 private:
  NStepTransition fold_from(std::size_t start) const {
    NStepTransition r;
    const Transition& first = window_[start];
    r.state = first.state;
    r.action_indices = first.action_indices;
    double discount = 1.0;
    double sum = 0.0;
    for (std::size_t i = start; i < window_.size(); ++i) {
      sum += discount * window_[i].reward;
      discount *= gamma_;
    }
    const Transition& last = window_.back();
    r.accumulated_reward = sum;
    r.bootstrap_state = last.next_state;
    r.effective_n = static_cast<int>(window_.size() - start);
    r.bootstrap_mask = last.terminal ? 0.0 : 1.0;
    return r;
  }

  int n_;
  double gamma_;
  std::deque<Transition> window_;
};

// Prioritized replay on a binary sum tree. Leaves hold priorities raised to
// the exponent alpha; raw |td| + floor priorities are kept alongside so the
// exponent can change without loss (the tree is rebuilt lazily when it does).
// Internal nodes are recomputed bottom-up from their children on every
// update, so each parent equals the sum of its children exactly.
//
// Not thread safe by design: one owner mutates it.
class SumTree {
 public:
  static constexpr double kPriorityFloor = 1e-6;

  explicit SumTree(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("SumTree: capacity must be positive");
    leaf_base_ = 1;
    while (leaf_base_ < capacity_) leaf_base_ <<= 1;
    tree_.assign(2 * leaf_base_, 0.0);
    raw_.assign(capacity_, 0.0);
    items_.reserve(std::min<std::size_t>(capacity_, 4096));
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  double total() const { return tree_[1]; }
  double max_raw_priority() const { return max_raw_; }
  double raw_priority(std::size_t leaf) const { return raw_[leaf]; }
  double leaf_value(std::size_t leaf) const { return tree_[leaf_base_ + leaf]; }
  double node(std::size_t i) const { return tree_[i]; }
  std::size_t leaf_base() const { return leaf_base_; }

  const NStepTransition& item(std::size_t leaf) const { return items_[leaf]; }

  // Insert with the running maximum raw priority so new experience is seen
  // soon. Overwrites the oldest slot once full.
  void add(NStepTransition item) {
    const std::size_t slot = cursor_;
    if (slot < items_.size()) {
      items_[slot] = std::move(item);
    } else {
      items_.push_back(std::move(item));
    }
    raw_[slot] = max_raw_;
    set_leaf(slot, std::pow(max_raw_, alpha_));
    cursor_ = (cursor_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
  }

  struct Sample {
    std::size_t leaf = 0;
    double is_weight = 1.0;
  };

  // Stratified proportional sampling: the cumulative mass is split into
  // batch_size equal segments with one draw each. Importance weights are
  // (N * P)^-beta, normalized by the batch maximum. Sampling with a batch
  // larger than the stored count is allowed (duplicates).
  std::vector<Sample> sample(int batch_size, double alpha, double beta,
                             std::mt19937_64& rng) {
    if (size_ == 0) throw LogicError("SumTree::sample: tree is empty");
    if (batch_size <= 0) throw LogicError("SumTree::sample: batch must be positive");
    ensure_alpha(alpha);
    const double mass = tree_[1];
    const double seg = mass / batch_size;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Sample> out(batch_size);
    double max_w = 0.0;
    for (int b = 0; b < batch_size; ++b) {
      double u = (b + unit(rng)) * seg;
      if (u >= mass) u = std::nextafter(mass, 0.0);
      std::size_t i = 1;
      while (i < leaf_base_) {
        const std::size_t left = 2 * i;
        if (u < tree_[left]) {
          i = left;
        } else {
          u -= tree_[left];
          i = left + 1;
        }
      }
      std::size_t leaf = i - leaf_base_;
      if (leaf >= size_) leaf = size_ - 1;  // float-boundary guard
      const double p = tree_[leaf_base_ + leaf] / mass;
      const double w = std::pow(static_cast<double>(size_) * p, -beta);
      out[b].leaf = leaf;
      out[b].is_weight = w;
      if (w > max_w) max_w = w;
    }
    for (Sample& s : out) s.is_weight /= max_w;
    return out;
  }

  // Refresh priorities from absolute TD errors (a small floor keeps every
  // stored item reachable).
  void update(std::span<const std::size_t> leaves, std::span<const double> td_abs) {
    if (leaves.size() != td_abs.size())
      throw LogicError("SumTree::update: leaves and priorities differ in length");
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      const std::size_t leaf = leaves[k];
      if (leaf >= size_) throw LogicError("SumTree::update: leaf out of range");
      const double raw = std::abs(td_abs[k]) + kPriorityFloor;
      if (!std::isfinite(raw)) throw NumericError("SumTree::update: non-finite priority");
      raw_[leaf] = raw;
      if (raw > max_raw_) max_raw_ = raw;
      set_leaf(leaf, std::pow(raw, alpha_));
    }
  }

  double current_alpha() const { return alpha_; }

 private:
  void ensure_alpha(double alpha) {
    if (alpha == alpha_) return;
    alpha_ = alpha;
    for (std::size_t i = 0; i < leaf_base_; ++i) {
      tree_[leaf_base_ + i] = i < size_ ? std::pow(raw_[i], alpha_) : 0.0;
    }
    for (std::size_t i = leaf_base_ - 1; i >= 1; --i) {
      tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
      if (i == 1) break;
    }
  }

  void set_leaf(std::size_t leaf, double value) {
    std::size_t i = leaf_base_ + leaf;
    tree_[i] = value;
    for (i >>= 1; i >= 1; i >>= 1) {
      tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
      if (i == 1) break;
    }
  }

  std::size_t capacity_;
  std::size_t leaf_base_ = 1;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  double alpha_ = 1.0;
  double max_raw_ = 1.0;
  std::vector<double> tree_;
  std::vector<double> raw_;
  std::vector<NStepTransition> items_;
};

}  // namespace decqn
