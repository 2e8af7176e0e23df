#pragma once

#include <cmath>
#include <cstddef>

#include "decqn/common.hpp"
#include "decqn/network.hpp"

namespace decqn {

// Adam with bias correction. Moment buffers reuse the parameter layout.
template <typename T>
struct AdamState {
  MlpParams<T> m;
  MlpParams<T> v;
  long long step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(const MlpShape& shape, double lr) {
    AdamState s;
    s.m = MlpParams<T>::zeros(shape);
    s.v = MlpParams<T>::zeros(shape);
    s.lr = lr;
    return s;
  }
};

namespace detail {

template <typename T>
void adam_update_span(T* p, const T* g, T* m, T* v, std::size_t n, double lr1,
                      double beta1, double beta2, double eps, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double mi = beta1 * m[i] + (1.0 - beta1) * gi;
    const double vi = beta2 * v[i] + (1.0 - beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    p[i] = static_cast<T>(p[i] - lr1 * mi / (std::sqrt(vi / bc2) + eps));
  }
}

}  // namespace detail

template <typename T>
void adam_step(AdamState<T>& state, MlpParams<T>& params, const MlpParams<T>& grads) {
  if (!(params.shape == state.m.shape))
    throw LogicError("adam_step: optimizer state does not match parameter shape");
  if (!(params.shape == grads.shape))
    throw LogicError("adam_step: gradient shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double lr1 = state.lr / bc1;

  // Walk all four structs in lockstep; visit order is fixed.
  T* pptr[10];
  const T* gptr[10];
  T* mptr[10];
  T* vptr[10];
  std::size_t sizes[10];
  std::size_t i = 0;
  params.visit([&](const char*, T* d, std::size_t n) {
    pptr[i] = d;
    sizes[i++] = n;
  });
  i = 0;
  grads.visit([&](const char*, const T* d, std::size_t) { gptr[i++] = d; });
  i = 0;
  state.m.visit([&](const char*, T* d, std::size_t) { mptr[i++] = d; });
  i = 0;
  state.v.visit([&](const char*, T* d, std::size_t) { vptr[i++] = d; });
  for (std::size_t k = 0; k < 10; ++k) {
    detail::adam_update_span(pptr[k], gptr[k], mptr[k], vptr[k], sizes[k], lr1,
                             state.beta1, state.beta2, state.eps, bc2);
  }
}

// Scales gradients in place when their global L2 norm exceeds max_norm.
// Returns the pre-clip norm. A non-finite norm aborts the run.
template <typename T>
double clip_global_norm(MlpParams<T>& grads, double max_norm) {
  double sq = 0.0;
  grads.visit([&](const char*, T* d, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) sq += static_cast<double>(d[k]) * d[k];
  });
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm))
    throw NumericError("clip_global_norm: non-finite gradient norm");
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    grads.visit([&](const char*, T* d, std::size_t n) {
      for (std::size_t k = 0; k < n; ++k) d[k] *= scale;
    });
  }
  return norm;
}

}  // namespace decqn
