#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "decqn/common.hpp"
#include "decqn/envs/matrix_games.hpp"

namespace decqn {

// Exhaustive ground truth for small discrete problems. Agents are scored
// against these numbers, never against hand-typed constants, so transcription
// errors in payoff tables stay detectable.

struct MdpSpec {
  struct Outcome {
    int next = 0;
    double reward = 0.0;
    bool terminal = false;
  };
  int n_states = 0;
  int n_actions = 0;
  int start = 0;
  std::vector<Outcome> table;  // indexed state * n_actions + action

  const Outcome& at(int s, int a) const { return table[static_cast<std::size_t>(s) * n_actions + a]; }
};

struct ViSolution {
  std::vector<double> values;
  std::vector<int> greedy;  // ties to the lowest action index
  double optimal_return = 0.0;
  int iterations = 0;
};

// Value iteration to a fixed point on a deterministic MDP.
inline ViSolution value_iterate(const MdpSpec& mdp, double gamma = 1.0,
                                int max_iters = 10000, double tol = 1e-12) {
  if (mdp.n_states <= 0 || mdp.n_actions <= 0)
    throw ConfigError("value_iterate: empty MDP");
  if (mdp.table.size() != static_cast<std::size_t>(mdp.n_states) * mdp.n_actions)
    throw ConfigError("value_iterate: outcome table size mismatch");
  ViSolution sol;
  sol.values.assign(mdp.n_states, 0.0);
  sol.greedy.assign(mdp.n_states, 0);
  for (int it = 0; it < max_iters; ++it) {
    double delta = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      double best = -1e300;
      int best_a = 0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        const auto& o = mdp.at(s, a);
        const double v = o.reward + (o.terminal ? 0.0 : gamma * sol.values[o.next]);
        if (v > best) {
          best = v;
          best_a = a;
        }
      }
      delta = std::max(delta, std::abs(best - sol.values[s]));
      sol.values[s] = best;
      sol.greedy[s] = best_a;
    }
    sol.iterations = it + 1;
    if (delta < tol) break;
  }
  sol.optimal_return = sol.values[mdp.start];
  return sol;
}

// The two-step game as a 3-state MDP over joint actions (2x2 -> 4 joint
// actions, agent-1-major).
inline MdpSpec two_step_mdp(const envs::PayoffMatrix& state2,
                            const envs::PayoffMatrix& state3) {
  MdpSpec m;
  m.n_states = 3;
  m.n_actions = 4;
  m.start = 0;
  m.table.resize(12);
  for (int a1 = 0; a1 < 2; ++a1) {
    for (int a2 = 0; a2 < 2; ++a2) {
      const int a = a1 * 2 + a2;
      m.table[0 * 4 + a] = {a1 == 0 ? 1 : 2, 0.0, false};
      m.table[1 * 4 + a] = {1, state2[a1][a2], true};
      m.table[2 * 4 + a] = {2, state3[a1][a2], true};
    }
  }
  return m;
}

struct MatrixOptimum {
  double value = 0.0;
  int a1 = 0;
  int a2 = 0;
};

inline MatrixOptimum matrix_optimum(const envs::PayoffMatrix& m) {
  MatrixOptimum best;
  best.value = m[0][0];
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      if (m[i][j] > best.value) {
        best.value = m[i][j];
        best.a1 = static_cast<int>(i);
        best.a2 = static_cast<int>(j);
      }
    }
  }
  return best;
}

// Best additive (rank-style) fit u_i + v_j + c to a complete payoff grid in
// the least-squares sense, via row/column means. A positive residual proves
// the matrix is not representable by any per-agent decomposition plus
// constant, which is exactly what a mean/sum-decomposed critic can express.
struct AdditiveFit {
  double grand_mean = 0.0;
  std::vector<double> row_effect;
  std::vector<double> col_effect;
  double sse = 0.0;
  double max_abs_residual = 0.0;

  double fitted(std::size_t i, std::size_t j) const {
    return grand_mean + row_effect[i] + col_effect[j];
  }
};

inline AdditiveFit additive_fit(const envs::PayoffMatrix& m) {
  envs::validate_payoff(m, "additive_fit");
  const std::size_t n = m.size();
  AdditiveFit fit;
  fit.row_effect.assign(n, 0.0);
  fit.col_effect.assign(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      total += m[i][j];
      fit.row_effect[i] += m[i][j];
      fit.col_effect[j] += m[i][j];
    }
  }
  fit.grand_mean = total / (n * n);
  for (std::size_t i = 0; i < n; ++i) {
    fit.row_effect[i] = fit.row_effect[i] / n - fit.grand_mean;
    fit.col_effect[i] = fit.col_effect[i] / n - fit.grand_mean;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double r = m[i][j] - fit.fitted(i, j);
      fit.sse += r * r;
      fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(r));
    }
  }
  return fit;
}

}  // namespace decqn
