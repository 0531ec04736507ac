#pragma once
// Weighted neighborhood field graph (WNFG): a directed, signed-weight graph over
// spectrum bins, stored one direction only in CSR form.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "signal.hpp"

namespace ssgc {

/// Neighborhood distance given either directly or as a fraction of n.
struct WnfgConfig {
  std::optional<std::size_t> K;
  std::optional<double> near_field_rate;

  static WnfgConfig with_K(std::size_t k) { return {k, std::nullopt}; }
  static WnfgConfig with_rate(double r) { return {std::nullopt, r}; }

  std::size_t resolve(std::size_t n) const;
};

/// CSR adjacency. Row i stores edges i->j with z_i > z_j; the matrix it
/// represents is the antisymmetric completion A(j,i) = -A(i,j).
struct SparseGraph {
  using index_type = std::uint32_t;

  std::size_t n = 0;
  std::size_t K = 0;
  std::vector<index_type> row_ptr;
  std::vector<index_type> col_idx;
  std::vector<double> weights;
  int label = 0;

  std::size_t nnz() const noexcept { return col_idx.size(); }

  std::size_t bytes() const noexcept {
    return row_ptr.size() * sizeof(index_type) + col_idx.size() * sizeof(index_type) +
           weights.size() * sizeof(double);
  }

  /// Full dense n x n matrix with the implied reverse direction. For tests and
  /// small debugging only.
  std::vector<double> to_dense() const {
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
        a[i * n + col_idx[e]] = weights[e];
        a[col_idx[e] * n + i] = -weights[e];
      }
    return a;
  }

  bool operator==(const SparseGraph&) const = default;
};

inline std::size_t near_field_rate_to_K(double rate, std::size_t n) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("near_field_rate must be in (0,1]");
  if (n < 2) throw std::invalid_argument("near_field_rate_to_K: n must be >= 2");
  // ceil of the exact product: 0.3 * 10 evaluates to 3.0000000000000004
  const double x = rate * static_cast<double>(n), r = std::round(x);
  auto k = static_cast<std::size_t>(std::abs(x - r) <= 1e-9 * std::max(1.0, x) ? r : std::ceil(x));
  if (k < 1) k = 1;
  if (k > n - 1) k = n - 1;
  return k;
}

inline std::size_t WnfgConfig::resolve(std::size_t n) const {
  if (K.has_value() == near_field_rate.has_value())
    throw std::invalid_argument("WnfgConfig: set exactly one of K or near_field_rate");
  if (near_field_rate) return near_field_rate_to_K(*near_field_rate, n);
  if (*K < 1 || *K > n - 1) throw std::invalid_argument("WnfgConfig: K must be in [1, n-1]");
  return *K;
}

/// Edge i->j for every 1 <= |i-j| <= K with z_i > z_j, weight (z_i-z_j)/(i-j).
inline SparseGraph build_wnfg(std::span<const double> z, std::size_t K, int label = 0) {
  const std::size_t n = z.size();
  if (n < 2) throw std::invalid_argument("build_wnfg: need at least 2 nodes");
  if (K < 1 || K > n - 1) throw std::invalid_argument("build_wnfg: K must be in [1, n-1]");
  SparseGraph g;
  g.n = n;
  g.K = K;
  g.label = label;
  g.row_ptr.resize(n + 1);
  g.col_idx.reserve(K * n);
  g.weights.reserve(K * n);
  g.row_ptr[0] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= K ? i - K : 0;
    const std::size_t hi = std::min(n - 1, i + K);
    const double zi = z[i];
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j == i || !(zi > z[j])) continue;
      g.col_idx.push_back(static_cast<SparseGraph::index_type>(j));
      g.weights.push_back((zi - z[j]) / (static_cast<double>(i) - static_cast<double>(j)));
    }
    g.row_ptr[i + 1] = static_cast<SparseGraph::index_type>(g.col_idx.size());
  }
  return g;
}

inline SparseGraph build_wnfg(const Spectrum& s, std::size_t K) {
  return build_wnfg(std::span<const double>(s.magnitudes), K, s.label);
}

inline SparseGraph build_wnfg(const Spectrum& s, const WnfgConfig& cfg) {
  return build_wnfg(s, cfg.resolve(s.size()));
}

/// All-pairs (K = n-1) stand-in for the dense overlook-graph baseline.
inline SparseGraph build_dense_baseline(const Spectrum& s) { return build_wnfg(s, s.size() - 1); }

/// out = A v with the antisymmetric completion materialised on the fly.
inline void adjacency_matvec(const SparseGraph& g, std::span<const double> v, std::span<double> out) {
  if (v.size() != g.n || out.size() != g.n)
    throw std::invalid_argument("adjacency_matvec: vector length does not match node count");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < g.n; ++i) {
    double acc = 0.0;
    const double vi = v[i];
    for (auto e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
      const auto j = g.col_idx[e];
      acc += g.weights[e] * v[j];
      out[j] -= g.weights[e] * vi;
    }
    out[i] += acc;
  }
}

inline std::vector<double> adjacency_matvec(const SparseGraph& g, std::span<const double> v) {
  std::vector<double> out(g.n);
  adjacency_matvec(g, v, out);
  return out;
}

struct GraphStats {
  std::size_t nnz = 0;
  std::size_t bytes = 0;
  double build_seconds = 0.0;
};

inline GraphStats graph_stats(const SparseGraph& g, double build_seconds = 0.0) {
  return {g.nnz(), g.bytes(), build_seconds};
}

/// Builds the graph and records its cost.
inline std::pair<SparseGraph, GraphStats> build_wnfg_timed(const Spectrum& s, std::size_t K) {
  const auto t0 = std::chrono::steady_clock::now();
  auto g = build_wnfg(s, K);
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  auto st = graph_stats(g, dt.count());
  return {std::move(g), st};
}

// Debug dump: header `n nnz K`, then one `i j w` line per stored edge.
inline void write_graph_dump(std::ostream& os, const SparseGraph& g) {
  os << g.n << ' ' << g.nnz() << ' ' << g.K << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < g.n; ++i)
    for (auto e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e)
      os << i << ' ' << g.col_idx[e] << ' ' << g.weights[e] << '\n';
}

inline SparseGraph read_graph_dump(std::istream& is) {
  SparseGraph g;
  std::size_t nnz = 0;
  if (!(is >> g.n >> nnz >> g.K)) throw std::runtime_error("graph dump: bad header");
  g.row_ptr.assign(g.n + 1, 0);
  std::size_t prev_i = 0;
  for (std::size_t e = 0; e < nnz; ++e) {
    std::size_t i = 0, j = 0;
    double w = 0.0;
    if (!(is >> i >> j >> w)) throw std::runtime_error("graph dump: truncated edge list");
    if (i >= g.n || j >= g.n || i < prev_i) throw std::runtime_error("graph dump: edge out of order");
    prev_i = i;
    ++g.row_ptr[i + 1];
    g.col_idx.push_back(static_cast<SparseGraph::index_type>(j));
    g.weights.push_back(w);
  }
  for (std::size_t i = 0; i < g.n; ++i) g.row_ptr[i + 1] += g.row_ptr[i];
  return g;
}

}  // namespace ssgc
