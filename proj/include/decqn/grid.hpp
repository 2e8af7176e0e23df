#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "decqn/common.hpp"

namespace decqn {

// Per-dimension discretization of a box action space into evenly spaced bins
// that include both boundary values. Bin k of dimension j maps to
//   lower_j * (bins-1-k)/(bins-1) + upper_j * k/(bins-1)
// which hits the endpoints exactly and, for symmetric bounds with odd bin
// counts, contains an exact zero.
class ActionGrid {
 public:
  ActionGrid() = default;

  ActionGrid(std::vector<double> lower, std::vector<double> upper, int bins)
      : lower_(std::move(lower)), upper_(std::move(upper)), bins_(bins) {
    if (lower_.empty() || lower_.size() != upper_.size())
      throw ConfigError("ActionGrid: bounds must be non-empty and equal length");
    if (bins_ < 2) throw ConfigError("ActionGrid: need at least 2 bins per dimension");
    for (std::size_t j = 0; j < lower_.size(); ++j) {
      if (!std::isfinite(lower_[j]) || !std::isfinite(upper_[j]))
        throw ConfigError("ActionGrid: bounds must be finite");
      if (!(lower_[j] < upper_[j]))
        throw ConfigError("ActionGrid: lower bound must be below upper bound in dimension " +
                          std::to_string(j));
    }
    values_.resize(lower_.size() * bins_);
    const double m = bins_ - 1;
    for (std::size_t j = 0; j < lower_.size(); ++j) {
      for (int k = 0; k < bins_; ++k) {
        // Endpoint-weighted form: exact at both boundaries, and exactly zero
        // at the midpoint of a symmetric range with an odd bin count (the
        // weights are exactly 0.5 there).
        values_[j * bins_ + k] = lower_[j] * ((m - k) / m) + upper_[j] * (k / m);
      }
    }
  }

  static ActionGrid symmetric(int dims, double bound, int bins) {
    return ActionGrid(std::vector<double>(dims, -bound), std::vector<double>(dims, bound),
                      bins);
  }

  int dims() const { return static_cast<int>(lower_.size()); }
  int bins() const { return bins_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }

  double value(int dim, int bin) const { return values_[static_cast<std::size_t>(dim) * bins_ + bin]; }

  // Bin indices -> continuous action.
  std::vector<double> action(std::span<const int> indices) const {
    if (static_cast<int>(indices.size()) != dims())
      throw LogicError("ActionGrid::action: wrong number of indices");
    std::vector<double> out(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (indices[j] < 0 || indices[j] >= bins_)
        throw LogicError("ActionGrid::action: bin index out of range");
      out[j] = value(static_cast<int>(j), indices[j]);
    }
    return out;
  }

  // Continuous action -> nearest bin per dimension, ties resolved toward the
  // lower index. Inputs outside the bounds (beyond a small tolerance) are
  // malformed data.
  std::vector<int> indices(std::span<const double> action) const {
    if (static_cast<int>(action.size()) != dims())
      throw DataError("ActionGrid::indices: wrong action dimensionality");
    std::vector<int> out(action.size());
    for (std::size_t j = 0; j < action.size(); ++j) {
      const double span_j = upper_[j] - lower_[j];
      const double tol = 1e-9 * std::max(1.0, std::abs(span_j));
      if (!(action[j] >= lower_[j] - tol) || !(action[j] <= upper_[j] + tol))
        throw DataError("ActionGrid::indices: action component " + std::to_string(j) +
                        " = " + std::to_string(action[j]) + " outside [" +
                        std::to_string(lower_[j]) + ", " + std::to_string(upper_[j]) + "]");
      const double t = (action[j] - lower_[j]) / span_j * (bins_ - 1);
      int k = static_cast<int>(std::lround(t));
      if (k < 0) k = 0;
      if (k >= bins_) k = bins_ - 1;
      // Nearest-bin with tie toward the lower index; lround ties away from
      // zero, so re-check against the left neighbor.
      if (k > 0) {
        const double d_left = std::abs(action[j] - value(static_cast<int>(j), k - 1));
        const double d_here = std::abs(action[j] - value(static_cast<int>(j), k));
        if (d_left <= d_here) k -= 1;
      }
      out[j] = k;
    }
    return out;
  }

 private:
  std::vector<double> lower_, upper_;
  int bins_ = 0;
  std::vector<double> values_;
};

}  // namespace decqn
