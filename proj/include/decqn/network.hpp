#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "decqn/blas.hpp"
#include "decqn/common.hpp"
#include "decqn/mat.hpp"

namespace decqn {

inline constexpr double kLayerNormEps = 1e-5;

// Huber loss on a scalar error and its derivative with respect to the error.
template <typename T>
T huber(T err, T delta) {
  const T a = err < T(0) ? -err : err;
  if (a <= delta) return T(0.5) * err * err;
  return delta * (a - T(0.5) * delta);
}

template <typename T>
T huber_grad(T err, T delta) {
  if (err > delta) return delta;
  if (err < -delta) return -delta;
  return err;
}

struct MlpShape {
  int in = 0;
  int hidden = 0;
  int out = 0;

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

// Parameters of the fixed torso: input projection, one residual block, layer
// norm, linear head. The same struct doubles as the gradient and Adam moment
// buffer so every tensor-wide loop goes through visit().
template <typename T>
struct MlpParams {
  MlpShape shape;
  Mat<T> w_in, w_res1, w_res2, w_out;
  std::vector<T> b_in, b_res1, b_res2, b_out;
  std::vector<T> ln_gain, ln_offset;

  static MlpParams zeros(const MlpShape& s) {
    MlpParams p;
    p.shape = s;
    p.w_in.resize(s.in, s.hidden);
    p.w_res1.resize(s.hidden, s.hidden);
    p.w_res2.resize(s.hidden, s.hidden);
    p.w_out.resize(s.hidden, s.out);
    p.b_in.assign(s.hidden, T(0));
    p.b_res1.assign(s.hidden, T(0));
    p.b_res2.assign(s.hidden, T(0));
    p.b_out.assign(s.out, T(0));
    p.ln_gain.assign(s.hidden, T(0));
    p.ln_offset.assign(s.hidden, T(0));
    return p;
  }

  template <typename F>
  void visit(F&& f) {
    f("w_in", w_in.data(), w_in.size());
    f("b_in", b_in.data(), b_in.size());
    f("w_res1", w_res1.data(), w_res1.size());
    f("b_res1", b_res1.data(), b_res1.size());
    f("w_res2", w_res2.data(), w_res2.size());
    f("b_res2", b_res2.data(), b_res2.size());
    f("ln_gain", ln_gain.data(), ln_gain.size());
    f("ln_offset", ln_offset.data(), ln_offset.size());
    f("w_out", w_out.data(), w_out.size());
    f("b_out", b_out.data(), b_out.size());
  }

  template <typename F>
  void visit(F&& f) const {
    f("w_in", w_in.data(), w_in.size());
    f("b_in", b_in.data(), b_in.size());
    f("w_res1", w_res1.data(), w_res1.size());
    f("b_res1", b_res1.data(), b_res1.size());
    f("w_res2", w_res2.data(), w_res2.size());
    f("b_res2", b_res2.data(), b_res2.size());
    f("ln_gain", ln_gain.data(), ln_gain.size());
    f("ln_offset", ln_offset.data(), ln_offset.size());
    f("w_out", w_out.data(), w_out.size());
    f("b_out", b_out.data(), b_out.size());
  }

  std::size_t count() const {
    std::size_t n = 0;
    visit([&](const char*, const T*, std::size_t m) { n += m; });
    return n;
  }

  void set_zero() {
    visit([](const char*, T* d, std::size_t n) { std::fill(d, d + n, T(0)); });
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    if (!(a.shape == b.shape)) return false;
    return a.w_in == b.w_in && a.b_in == b.b_in && a.w_res1 == b.w_res1 &&
           a.b_res1 == b.b_res1 && a.w_res2 == b.w_res2 && a.b_res2 == b.b_res2 &&
           a.ln_gain == b.ln_gain && a.ln_offset == b.ln_offset &&
           a.w_out == b.w_out && a.b_out == b.b_out;
  }
};

namespace detail {

template <typename T>
void fill_uniform(Mat<T>& w, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& x : w.flat()) x = static_cast<T>(dist(rng));
}

}  // namespace detail

// Hidden layers use fan-in scaled uniform init, the head starts near zero so
// initial value estimates are near zero regardless of input scale.
template <typename T>
MlpParams<T> init_params(const MlpShape& s, std::mt19937_64& rng) {
  if (s.in <= 0 || s.hidden <= 0 || s.out <= 0)
    throw ConfigError("init_params: all network dimensions must be positive");
  MlpParams<T> p = MlpParams<T>::zeros(s);
  detail::fill_uniform(p.w_in, std::sqrt(6.0 / s.in), rng);
  detail::fill_uniform(p.w_res1, std::sqrt(6.0 / s.hidden), rng);
  detail::fill_uniform(p.w_res2, std::sqrt(6.0 / s.hidden), rng);
  detail::fill_uniform(p.w_out, 1e-3, rng);
  std::fill(p.ln_gain.begin(), p.ln_gain.end(), T(1));
  return p;
}

// Activations kept by the forward pass for the manual backward pass.
template <typename T>
struct ForwardCache {
  Mat<T> input;    // B x in
  Mat<T> h_in;     // B x H, post-relu input projection
  Mat<T> h_res1;   // B x H, post-relu inner layer of the residual block
  Mat<T> xhat;     // B x H, normalized pre-gain activations
  Mat<T> h_norm;   // B x H, layer norm output feeding the head
  std::vector<T> inv_std;  // per-row 1/sqrt(var + eps)
};

namespace detail {

template <typename T>
void add_bias(Mat<T>& m, const std::vector<T>& b) {
  for (int r = 0; r < m.rows(); ++r) {
    T* row = m.row(r);
    for (int c = 0; c < m.cols(); ++c) row[c] += b[c];
  }
}

template <typename T>
void relu_inplace(Mat<T>& m) {
  for (T& x : m.flat())
    if (x < T(0)) x = T(0);
}

template <typename T>
void colsum_into(const Mat<T>& m, std::vector<T>& out) {
  out.assign(m.cols(), T(0));
  for (int r = 0; r < m.rows(); ++r) {
    const T* row = m.row(r);
    for (int c = 0; c < m.cols(); ++c) out[c] += row[c];
  }
}

}  // namespace detail

// x -> dense -> relu -> [dense -> relu -> dense, added to block input]
//   -> layer norm -> dense head. Shape errors are configuration errors.
template <typename T>
Mat<T> mlp_forward(const MlpParams<T>& p, const Mat<T>& x, ForwardCache<T>* cache = nullptr) {
  if (x.cols() != p.shape.in)
    throw ConfigError("mlp_forward: input has " + std::to_string(x.cols()) +
                      " columns, network expects " + std::to_string(p.shape.in));
  const int batch = x.rows();
  const int h = p.shape.hidden;

  Mat<T> local_h_in, local_h_res1, local_xhat, local_h_norm;
  std::vector<T> local_inv;
  Mat<T>& h_in = cache ? cache->h_in : local_h_in;
  Mat<T>& h_res1 = cache ? cache->h_res1 : local_h_res1;
  Mat<T>& xhat = cache ? cache->xhat : local_xhat;
  Mat<T>& h_norm = cache ? cache->h_norm : local_h_norm;
  std::vector<T>& inv_std = cache ? cache->inv_std : local_inv;
  if (cache) cache->input = x;

  h_in.resize(batch, h);
  gemm<T>(false, false, T(1), x, p.w_in, T(0), h_in);
  detail::add_bias(h_in, p.b_in);
  detail::relu_inplace(h_in);

  h_res1.resize(batch, h);
  gemm<T>(false, false, T(1), h_in, p.w_res1, T(0), h_res1);
  detail::add_bias(h_res1, p.b_res1);
  detail::relu_inplace(h_res1);

  // Residual sum lands in xhat, then gets normalized in place.
  xhat.resize(batch, h);
  gemm<T>(false, false, T(1), h_res1, p.w_res2, T(0), xhat);
  for (int r = 0; r < batch; ++r) {
    T* dst = xhat.row(r);
    const T* skip = h_in.row(r);
    for (int c = 0; c < h; ++c) dst[c] += skip[c] + p.b_res2[c];
  }

  h_norm.resize(batch, h);
  inv_std.assign(batch, T(0));
  for (int r = 0; r < batch; ++r) {
    T* row = xhat.row(r);
    double mean = 0.0;
    for (int c = 0; c < h; ++c) mean += row[c];
    mean /= h;
    double var = 0.0;
    for (int c = 0; c < h; ++c) {
      const double d = row[c] - mean;
      var += d * d;
    }
    var /= h;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[r] = static_cast<T>(inv);
    T* out_row = h_norm.row(r);
    for (int c = 0; c < h; ++c) {
      row[c] = static_cast<T>((row[c] - mean) * inv);
      out_row[c] = p.ln_gain[c] * row[c] + p.ln_offset[c];
    }
  }

  Mat<T> out(batch, p.shape.out);
  gemm<T>(false, false, T(1), h_norm, p.w_out, T(0), out);
  detail::add_bias(out, p.b_out);
  return out;
}

// Reverse pass for mlp_forward. dout is d(loss)/d(head output); grads is
// overwritten. Gradients with respect to the input are not produced, nothing
// upstream of the network is trained.
template <typename T>
void mlp_backward(const MlpParams<T>& p, const ForwardCache<T>& cache, const Mat<T>& dout,
                  MlpParams<T>& grads) {
  const int batch = cache.input.rows();
  const int h = p.shape.hidden;
  if (dout.rows() != batch || dout.cols() != p.shape.out)
    throw LogicError("mlp_backward: dout shape mismatch");
  if (!(grads.shape == p.shape)) grads = MlpParams<T>::zeros(p.shape);

  gemm<T>(true, false, T(1), cache.h_norm, dout, T(0), grads.w_out);
  detail::colsum_into(dout, grads.b_out);

  Mat<T> dnorm(batch, h);
  gemm<T>(false, true, T(1), dout, p.w_out, T(0), dnorm);

  grads.ln_gain.assign(h, T(0));
  grads.ln_offset.assign(h, T(0));
  Mat<T> dres(batch, h);
  for (int r = 0; r < batch; ++r) {
    const T* dn = dnorm.row(r);
    const T* xh = cache.xhat.row(r);
    T* dr = dres.row(r);
    double s1 = 0.0, s2 = 0.0;
    for (int c = 0; c < h; ++c) {
      grads.ln_gain[c] += dn[c] * xh[c];
      grads.ln_offset[c] += dn[c];
      const double dxhat = static_cast<double>(dn[c]) * p.ln_gain[c];
      dr[c] = static_cast<T>(dxhat);
      s1 += dxhat;
      s2 += dxhat * xh[c];
    }
    const double inv = cache.inv_std[r];
    for (int c = 0; c < h; ++c) {
      dr[c] = static_cast<T>(inv * (dr[c] - (s1 + static_cast<double>(xh[c]) * s2) / h));
    }
  }

  detail::colsum_into(dres, grads.b_res2);
  gemm<T>(true, false, T(1), cache.h_res1, dres, T(0), grads.w_res2);

  Mat<T> dh_res1(batch, h);
  gemm<T>(false, true, T(1), dres, p.w_res2, T(0), dh_res1);
  for (int r = 0; r < batch; ++r) {
    T* d = dh_res1.row(r);
    const T* act = cache.h_res1.row(r);
    for (int c = 0; c < h; ++c)
      if (act[c] <= T(0)) d[c] = T(0);
  }

  detail::colsum_into(dh_res1, grads.b_res1);
  gemm<T>(true, false, T(1), cache.h_in, dh_res1, T(0), grads.w_res1);

  // dres flows to the block input both through the residual skip and through
  // the inner layers; accumulate then mask by the first relu.
  Mat<T>& dh_in = dres;
  gemm<T>(false, true, T(1), dh_res1, p.w_res1, T(1), dh_in);
  for (int r = 0; r < batch; ++r) {
    T* d = dh_in.row(r);
    const T* act = cache.h_in.row(r);
    for (int c = 0; c < h; ++c)
      if (act[c] <= T(0)) d[c] = T(0);
  }

  detail::colsum_into(dh_in, grads.b_in);
  gemm<T>(true, false, T(1), cache.input, dh_in, T(0), grads.w_in);
}

}  // namespace decqn
