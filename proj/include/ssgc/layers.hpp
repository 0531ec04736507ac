#pragma once
// Forward/backward kernels for the fixed layer set. All math is float64 and
// evaluated in a fixed loop order so results are bitwise reproducible.

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wnfg.hpp"

namespace ssgc {

/// channels x length activation, row-major by channel.
struct Tensor {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t c, std::size_t l, double fill = 0.0) : channels(c), length(l), data(c * l, fill) {}
  static Tensor vector(std::vector<double> v) {
    Tensor t;
    t.channels = 1;
    t.length = v.size();
    t.data = std::move(v);
    return t;
  }

  std::size_t size() const noexcept { return data.size(); }
  double& at(std::size_t c, std::size_t i) { return data[c * length + i]; }
  double at(std::size_t c, std::size_t i) const { return data[c * length + i]; }
  bool operator==(const Tensor&) const = default;
};

namespace detail {
inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}
}  // namespace detail

// ---- hop aggregation -------------------------------------------------------

/// h0 = 1, h_k = h_{k-1} + A h_{k-1}. With `unweighted` every stored edge
/// counts as weight 1 in both directions (plain neighbor sum).
inline std::vector<double> aggregate(const SparseGraph& g, std::size_t hops, bool unweighted = false) {
  detail::require(hops >= 1, "aggregate: hops must be >= 1");
  std::vector<double> h(g.n, 1.0), ah(g.n);
  for (std::size_t k = 0; k < hops; ++k) {
    if (unweighted) {
      std::fill(ah.begin(), ah.end(), 0.0);
      for (std::size_t i = 0; i < g.n; ++i)
        for (auto e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
          ah[i] += h[g.col_idx[e]];
          ah[g.col_idx[e]] += h[i];
        }
    } else {
      adjacency_matvec(g, h, ah);
    }
    for (std::size_t i = 0; i < g.n; ++i) h[i] += ah[i];
  }
  return h;
}

// ---- node scale ------------------------------------------------------------

inline std::vector<double> node_scale_forward(std::span<const double> h, std::span<const double> theta) {
  detail::require(h.size() == theta.size(), "node_scale: length mismatch");
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = theta[i] * h[i];
  return out;
}

/// dh += dy * theta, dtheta += dy * h
inline void node_scale_backward(std::span<const double> h, std::span<const double> theta,
                                std::span<const double> dy, std::span<double> dh, std::span<double> dtheta) {
  for (std::size_t i = 0; i < h.size(); ++i) {
    dh[i] += dy[i] * theta[i];
    dtheta[i] += dy[i] * h[i];
  }
}

// ---- 1-D convolution -------------------------------------------------------

/// Cross-correlation, stride 1. Weights laid out [out_ch][in_ch][kernel].
/// With zero_pad the padding is (kernel-1)/2 on both sides and the length is
/// preserved for odd kernels.
inline Tensor conv1d_forward(const Tensor& x, std::span<const double> w, std::span<const double> b,
                             std::size_t out_ch, std::size_t kernel, bool zero_pad = true) {
  const std::size_t in_ch = x.channels;
  detail::require(w.size() == out_ch * in_ch * kernel, "conv1d: weight shape mismatch");
  detail::require(b.size() == out_ch, "conv1d: bias shape mismatch");
  const std::size_t pad = zero_pad ? (kernel - 1) / 2 : 0;
  detail::require(x.length + 2 * pad >= kernel, "conv1d: input shorter than kernel");
  const std::size_t out_len = x.length + 2 * pad - kernel + 1;
  Tensor y(out_ch, out_len);
  for (std::size_t o = 0; o < out_ch; ++o) {
    double* yo = &y.data[o * out_len];
    std::fill(yo, yo + out_len, b[o]);
    for (std::size_t c = 0; c < in_ch; ++c) {
      const double* xc = &x.data[c * x.length];
      for (std::size_t u = 0; u < kernel; ++u) {
        // valid outputs t satisfy 0 <= t + u - pad < length
        const std::size_t lo = pad > u ? pad - u : 0;
        const std::size_t hi = x.length + pad > u ? std::min(out_len, x.length + pad - u) : 0;
        const double wk = w[(o * in_ch + c) * kernel + u];
        const double* xs = xc + (u + lo - pad);
        for (std::size_t t = lo; t < hi; ++t) yo[t] += wk * xs[t - lo];
      }
    }
  }
  return y;
}

/// Accumulates into dx, dw, db.
inline void conv1d_backward(const Tensor& x, std::span<const double> w, const Tensor& dy, std::size_t kernel,
                            bool zero_pad, Tensor& dx, std::span<double> dw, std::span<double> db) {
  const std::size_t in_ch = x.channels, out_ch = dy.channels;
  const std::size_t pad = zero_pad ? (kernel - 1) / 2 : 0;
  const std::size_t out_len = dy.length;
  for (std::size_t o = 0; o < out_ch; ++o) {
    const double* go = &dy.data[o * out_len];
    double sum = 0.0;
    for (std::size_t t = 0; t < out_len; ++t) sum += go[t];
    db[o] += sum;
    for (std::size_t c = 0; c < in_ch; ++c) {
      const double* xc = &x.data[c * x.length];
      double* dxc = &dx.data[c * x.length];
      for (std::size_t u = 0; u < kernel; ++u) {
        const std::size_t lo = pad > u ? pad - u : 0;
        const std::size_t hi = x.length + pad > u ? std::min(out_len, x.length + pad - u) : 0;
        if (hi <= lo) continue;
        const std::size_t k = (o * in_ch + c) * kernel + u;
        const double wk = w[k];
        const double* xs = xc + (u + lo - pad);
        double* dxs = dxc + (u + lo - pad);
        const double* gs = go + lo;
        double acc = 0.0;
        for (std::size_t t = 0; t < hi - lo; ++t) {
          acc += gs[t] * xs[t];
          dxs[t] += gs[t] * wk;
        }
        dw[k] += acc;
      }
    }
  }
}

// ---- max pooling -------------------------------------------------------------

/// Window `width`, step `stride`; windows that would run past the end are
/// dropped. `argmax` receives the flat source index of each output (first
/// maximum wins on ties).
inline Tensor maxpool_forward(const Tensor& x, std::size_t width, std::size_t stride,
                              std::vector<std::size_t>& argmax) {
  detail::require(width >= 1 && stride >= 1, "maxpool: width and stride must be positive");
  const std::size_t out_len = x.length >= width ? (x.length - width) / stride + 1 : 0;
  Tensor y(x.channels, out_len);
  argmax.assign(y.size(), 0);
  for (std::size_t c = 0; c < x.channels; ++c)
    for (std::size_t i = 0; i < out_len; ++i) {
      std::size_t best = i * stride;
      for (std::size_t k = 1; k < width; ++k)
        if (x.at(c, i * stride + k) > x.at(c, best)) best = i * stride + k;
      y.at(c, i) = x.at(c, best);
      argmax[c * out_len + i] = c * x.length + best;
    }
  return y;
}

inline Tensor maxpool2(const Tensor& x, std::vector<std::size_t>& argmax) { return maxpool_forward(x, 2, 2, argmax); }

inline void maxpool_backward(const Tensor& dy, const std::vector<std::size_t>& argmax, Tensor& dx) {
  for (std::size_t k = 0; k < dy.size(); ++k) dx.data[argmax[k]] += dy.data[k];
}

// ---- dense -------------------------------------------------------------------

/// y = W x + b with W laid out [out_dim][in_dim]. Activation is a separate layer.
inline std::vector<double> dense_forward(std::span<const double> x, std::span<const double> w,
                                         std::span<const double> b) {
  const std::size_t out_dim = b.size(), in_dim = x.size();
  detail::require(w.size() == out_dim * in_dim, "dense: weight shape mismatch");
  std::vector<double> y(out_dim);
  for (std::size_t o = 0; o < out_dim; ++o) {
    double acc = b[o];
    const double* row = &w[o * in_dim];
    for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
  return y;
}

inline void dense_backward(std::span<const double> x, std::span<const double> w, std::span<const double> dy,
                           std::span<double> dx, std::span<double> dw, std::span<double> db) {
  const std::size_t in_dim = x.size();
  for (std::size_t o = 0; o < dy.size(); ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    db[o] += g;
    const double* row = &w[o * in_dim];
    double* drow = &dw[o * in_dim];
    for (std::size_t i = 0; i < in_dim; ++i) {
      drow[i] += g * x[i];
      dx[i] += g * row[i];
    }
  }
}

// ---- relu --------------------------------------------------------------------

inline Tensor relu_forward(Tensor x) {
  for (auto& v : x.data) v = v > 0.0 ? v : 0.0;
  return x;
}

/// Gradient passes where the forward input was positive.
inline void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx) {
  for (std::size_t k = 0; k < x.size(); ++k)
    if (x.data[k] > 0.0) dx.data[k] += dy.data[k];
}

}  // namespace ssgc
