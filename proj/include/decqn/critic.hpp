#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "decqn/common.hpp"
#include "decqn/mat.hpp"
#include "decqn/network.hpp"
#include "decqn/replay.hpp"

namespace decqn {

// How per-dimension utilities combine into a joint value.
enum class Aggregation { kMean, kSum };

// Joint: one TD error on the composed value per critic. Independent: each
// action dimension regresses on its own per-dimension target.
enum class LossMode { kJoint, kIndependent };

// Zero-copy view of one batch row of the critic head as an n_a x n_b utility
// table: entry (j, k) is the utility of bin k in action dimension j.
template <typename T>
struct UtilityView {
  const T* data = nullptr;
  int n_a = 0;
  int n_b = 0;

  T at(int j, int k) const { return data[static_cast<std::size_t>(j) * n_b + k]; }
};

// Reshape of the flat head output; the head must have exactly n_a*n_b units.
template <typename T>
UtilityView<T> utility_view(const Mat<T>& raw, int row, int n_a, int n_b) {
  if (raw.cols() != n_a * n_b)
    throw ConfigError("utility_view: head width " + std::to_string(raw.cols()) +
                      " is not n_a*n_b = " + std::to_string(n_a * n_b));
  if (row < 0 || row >= raw.rows()) throw LogicError("utility_view: row out of range");
  return UtilityView<T>{raw.row(row), n_a, n_b};
}

// Argmax independently per action dimension, ties to the lowest bin index.
template <typename T>
void decoupled_argmax_into(UtilityView<T> t, std::span<int> out) {
  for (int j = 0; j < t.n_a; ++j) {
    int best = 0;
    T best_v = t.at(j, 0);
    for (int k = 1; k < t.n_b; ++k) {
      const T v = t.at(j, k);
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    out[j] = best;
  }
}

template <typename T>
std::vector<int> decoupled_argmax(UtilityView<T> t) {
  std::vector<int> out(t.n_a);
  decoupled_argmax_into(t, std::span<int>(out));
  return out;
}

// Joint value of one action under the decomposition.
template <typename T>
T compose_q(UtilityView<T> t, std::span<const int> indices, Aggregation agg) {
  if (static_cast<int>(indices.size()) != t.n_a)
    throw LogicError("compose_q: wrong index count");
  double sum = 0.0;
  for (int j = 0; j < t.n_a; ++j) {
    const int k = indices[j];
    if (k < 0 || k >= t.n_b) throw LogicError("compose_q: bin index out of range");
    sum += t.at(j, k);
  }
  if (agg == Aggregation::kMean) sum /= t.n_a;
  return static_cast<T>(sum);
}

// Greedy action for twin critics: per-dimension argmax over the elementwise
// maximum of the two tables.
template <typename T>
void double_q_select_into(UtilityView<T> a, UtilityView<T> b, std::span<int> out) {
  for (int j = 0; j < a.n_a; ++j) {
    int best = 0;
    T best_v = std::max(a.at(j, 0), b.at(j, 0));
    for (int k = 1; k < a.n_b; ++k) {
      const T v = std::max(a.at(j, k), b.at(j, k));
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    out[j] = best;
  }
}

template <typename T>
std::vector<int> double_q_select(UtilityView<T> a, UtilityView<T> b) {
  std::vector<int> out(a.n_a);
  double_q_select_into(a, b, std::span<int>(out));
  return out;
}

// n-step target for one record: accumulated reward plus the masked, discounted
// bootstrap value of `greedy` under the averaged target tables. Pass the same
// view twice to bootstrap from a single critic. The realized window length
// sets the discount exponent; the mask is zero when the window ended in an
// environment terminal, so timeouts still bootstrap.
template <typename T>
T bellman_target(const NStepTransition& tr, UtilityView<T> target1, UtilityView<T> target2,
                 std::span<const int> greedy, T gamma, Aggregation agg) {
  double v = 0.0;
  for (int j = 0; j < target1.n_a; ++j) {
    const int k = greedy[j];
    v += 0.5 * (static_cast<double>(target1.at(j, k)) + target2.at(j, k));
  }
  if (agg == Aggregation::kMean) v /= target1.n_a;
  const double discount =
      tr.bootstrap_mask * std::pow(static_cast<double>(gamma), tr.effective_n);
  return static_cast<T>(tr.accumulated_reward + discount * v);
}

template <typename T>
struct TdLossSpec {
  int n_a = 0;
  int n_b = 0;
  Aggregation aggregation = Aggregation::kMean;
  LossMode loss_mode = LossMode::kJoint;
  T delta = T(1);
  T gamma = T(0.99);
  bool use_double_q = true;
  // One-sided updates: negative TD errors (target below the estimate) are
  // masked out per critic, so values only ratchet upward.
  bool optimistic = false;
};

template <typename T>
struct TdLossResult {
  T loss = T(0);
  std::vector<double> td_abs;       // per item, for priority refresh
  Mat<T> dout1, dout2;              // d(loss)/d(head output) per critic
  ForwardCache<T> cache1, cache2;   // forward caches of the online critics
  Mat<T> out1, out2;                // online head outputs on the batch states
};

// Semi-gradient TD loss for twin critics over a sampled batch: forwards both
// online critics on the batch states, builds per-item targets from the target
// critics (action selection by the online critics when double-Q is on), and
// returns the importance-weighted mean Huber loss together with everything the
// backward pass needs. Targets are constants with respect to the parameters.
template <typename T>
TdLossResult<T> td_loss(std::span<const NStepTransition* const> batch,
                        const MlpParams<T>& online1, const MlpParams<T>& online2,
                        const MlpParams<T>& target1, const MlpParams<T>& target2,
                        std::span<const double> is_weights, const TdLossSpec<T>& spec) {
  const int bsz = static_cast<int>(batch.size());
  if (bsz == 0) throw LogicError("td_loss: empty batch");
  if (is_weights.size() != batch.size())
    throw LogicError("td_loss: weight count does not match batch");
  const int n_a = spec.n_a;
  const int n_b = spec.n_b;
  const int dim_s = online1.shape.in;

  Mat<T> states(bsz, dim_s);
  Mat<T> boot(bsz, dim_s);
  for (int i = 0; i < bsz; ++i) {
    const NStepTransition& tr = *batch[i];
    if (static_cast<int>(tr.state.size()) != dim_s ||
        static_cast<int>(tr.bootstrap_state.size()) != dim_s)
      throw LogicError("td_loss: transition state width mismatch");
    for (int c = 0; c < dim_s; ++c) {
      states(i, c) = static_cast<T>(tr.state[c]);
      boot(i, c) = static_cast<T>(tr.bootstrap_state[c]);
    }
  }

  TdLossResult<T> res;
  res.out1 = mlp_forward(online1, states, &res.cache1);
  const Mat<T> tgt1 = mlp_forward(target1, boot);
  Mat<T> tgt2, on_boot1, on_boot2;
  if (spec.use_double_q) {
    res.out2 = mlp_forward(online2, states, &res.cache2);
    tgt2 = mlp_forward(target2, boot);
    on_boot1 = mlp_forward(online1, boot);
    on_boot2 = mlp_forward(online2, boot);
  }

  res.td_abs.assign(bsz, 0.0);
  res.dout1.resize(bsz, n_a * n_b);
  res.dout2.resize(bsz, n_a * n_b);
  res.dout1.zero();
  res.dout2.zero();

  const double dim_scale = spec.aggregation == Aggregation::kMean ? 1.0 / n_a : 1.0;
  std::vector<int> greedy(n_a);
  double loss = 0.0;

  for (int i = 0; i < bsz; ++i) {
    const NStepTransition& tr = *batch[i];
    if (static_cast<int>(tr.action_indices.size()) != n_a)
      throw LogicError("td_loss: action index count mismatch");
    const double w = is_weights[i];
    const auto vt1 = utility_view(tgt1, i, n_a, n_b);
    const auto vt2 = spec.use_double_q ? utility_view(tgt2, i, n_a, n_b) : vt1;
    const auto vo1 = utility_view(res.out1, i, n_a, n_b);

    if (spec.loss_mode == LossMode::kJoint) {
      if (spec.use_double_q) {
        double_q_select_into(utility_view(on_boot1, i, n_a, n_b),
                             utility_view(on_boot2, i, n_a, n_b), std::span<int>(greedy));
      } else {
        decoupled_argmax_into(vt1, std::span<int>(greedy));
      }
      const T y = bellman_target(tr, vt1, vt2, greedy, spec.gamma, spec.aggregation);
      const T q1 = compose_q(vo1, tr.action_indices, spec.aggregation);
      const T e1 = y - q1;
      T e2 = T(0);
      const bool m1 = !spec.optimistic || e1 > T(0);
      bool m2 = false;
      if (spec.use_double_q) {
        const T q2 = compose_q(utility_view(res.out2, i, n_a, n_b), tr.action_indices,
                               spec.aggregation);
        e2 = y - q2;
        m2 = !spec.optimistic || e2 > T(0);
        res.td_abs[i] = std::abs(0.5 * (static_cast<double>(e1) + e2));
      } else {
        res.td_abs[i] = std::abs(static_cast<double>(e1));
      }
      if (m1) loss += w * huber(static_cast<double>(e1), static_cast<double>(spec.delta));
      if (m2) loss += w * huber(static_cast<double>(e2), static_cast<double>(spec.delta));
      // dLoss/dQ = -huber'(e); spread over the selected entries by the
      // aggregation weight.
      for (int j = 0; j < n_a; ++j) {
        const int col = j * n_b + tr.action_indices[j];
        if (m1)
          res.dout1(i, col) = static_cast<T>(-w * huber_grad(static_cast<double>(e1),
                                                             static_cast<double>(spec.delta)) *
                                             dim_scale);
        if (m2)
          res.dout2(i, col) = static_cast<T>(-w * huber_grad(static_cast<double>(e2),
                                                             static_cast<double>(spec.delta)) *
                                             dim_scale);
      }
    } else {
      // Independent mode: each dimension bootstraps from its own row maximum
      // of the averaged target tables. No cross-dimension coupling at all.
      const double discount =
          tr.bootstrap_mask * std::pow(static_cast<double>(spec.gamma), tr.effective_n);
      double td_sum = 0.0;
      for (int j = 0; j < n_a; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < n_b; ++k) {
          const double v = 0.5 * (static_cast<double>(vt1.at(j, k)) + vt2.at(j, k));
          if (v > best) best = v;
        }
        const double yj = tr.accumulated_reward + discount * best;
        const int col = j * n_b + tr.action_indices[j];
        const double e1 = yj - vo1.at(j, tr.action_indices[j]);
        const bool m1 = !spec.optimistic || e1 > 0.0;
        if (m1) {
          loss += w * huber(e1, static_cast<double>(spec.delta));
          res.dout1(i, col) =
              static_cast<T>(-w * huber_grad(e1, static_cast<double>(spec.delta)));
        }
        double e_mid = e1;
        if (spec.use_double_q) {
          const double e2 =
              yj - utility_view(res.out2, i, n_a, n_b).at(j, tr.action_indices[j]);
          const bool m2 = !spec.optimistic || e2 > 0.0;
          if (m2) {
            loss += w * huber(e2, static_cast<double>(spec.delta));
            res.dout2(i, col) =
                static_cast<T>(-w * huber_grad(e2, static_cast<double>(spec.delta)));
          }
          e_mid = 0.5 * (e1 + e2);
        }
        td_sum += std::abs(e_mid);
      }
      res.td_abs[i] = td_sum / n_a;
    }
  }

  loss /= bsz;
  const T scale = static_cast<T>(1.0 / bsz);
  for (T& g : res.dout1.flat()) g *= scale;
  for (T& g : res.dout2.flat()) g *= scale;
  res.loss = static_cast<T>(loss);
  return res;
}

}  // namespace decqn
