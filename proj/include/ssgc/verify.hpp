#pragma once
// Self-check suites run by `ssgc verify`: each compares a production routine
// against a slow, obviously-correct reference.

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "admm.hpp"
#include "layers.hpp"
#include "loss.hpp"
#include "model.hpp"
#include "wnfg.hpp"

namespace ssgc::verify {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // largest observed error statistic
  double tolerance = 0.0;
  bool passed() const { return failures == 0 && cases > 0; }
};

// ---- references ------------------------------------------------------------------

/// Best subset of size <= budget by enumeration (lowest squared distance;
/// ties keep the lexicographically first mask).
inline std::vector<double> exhaustive_projection(const std::vector<double>& v, std::size_t budget) {
  const std::size_t n = v.size();
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t best_mask = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > budget) continue;
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!((mask >> i) & 1u)) d += v[i] * v[i];
    if (d < best) {
      best = d;
      best_mask = mask;
    }
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if ((best_mask >> i) & 1u) out[i] = v[i];
  return out;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

/// Dense (I + A)^hops * 1 with A the antisymmetric completion.
inline std::vector<double> dense_aggregate(const SparseGraph& g, std::size_t hops) {
  const auto A = g.to_dense();
  const std::size_t n = g.n;
  std::vector<double> h(n, 1.0);
  for (std::size_t k = 0; k < hops; ++k) {
    std::vector<double> next(h);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) next[i] += A[i * n + j] * h[j];
    h = std::move(next);
  }
  return h;
}

/// ||a - b|| / max(||a|| + ||b||, floor)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(na) + std::sqrt(nb), floor);
}

/// Central differences of f at x.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// ---- gradient cases ---------------------------------------------------------------
// Each case packs (input, parameters) into one vector so a single finite
// difference sweep covers both gradients. The scalar objective is r . y for a
// fixed random r.

struct GradCase {
  std::vector<double> x;
  std::function<double(const std::vector<double>&)> f;
  std::function<std::vector<double>(const std::vector<double>&)> grad;
};

inline std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline GradCase dense_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(1, 8);
  const std::size_t in = d(rng), out = d(rng);
  const auto r = random_vec(rng, out);
  auto split = [=](const std::vector<double>& p) {
    return std::tuple{std::span<const double>(p.data(), in), std::span<const double>(p.data() + in, in * out),
                      std::span<const double>(p.data() + in + in * out, out)};
  };
  GradCase c;
  c.x = random_vec(rng, in + in * out + out);
  c.f = [=](const std::vector<double>& p) {
    auto [x, w, b] = split(p);
    return dot(dense_forward(x, w, b), r);
  };
  c.grad = [=](const std::vector<double>& p) {
    auto [x, w, b] = split(p);
    std::vector<double> g(p.size(), 0.0);
    dense_backward(x, w, r, std::span<double>(g.data(), in), std::span<double>(g.data() + in, in * out),
                   std::span<double>(g.data() + in + in * out, out));
    return g;
  };
  return c;
}

inline GradCase conv_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> ch(1, 4), len(4, 12), kh(0, 2);
  const std::size_t ic = ch(rng), oc = ch(rng), L = len(rng), k = 2 * kh(rng) + 1;
  const bool pad = std::bernoulli_distribution(0.5)(rng);
  const std::size_t out_len = pad ? L : L - k + 1;
  const auto r = random_vec(rng, oc * out_len);
  const std::size_t nx = ic * L, nw = oc * ic * k;
  auto unpack = [=](const std::vector<double>& p) {
    Tensor x(ic, L);
    std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(nx), x.data.begin());
    return x;
  };
  GradCase c;
  c.x = random_vec(rng, nx + nw + oc);
  c.f = [=](const std::vector<double>& p) {
    const auto y = conv1d_forward(unpack(p), std::span<const double>(p.data() + nx, nw),
                                  std::span<const double>(p.data() + nx + nw, oc), oc, k, pad);
    return dot(y.data, r);
  };
  c.grad = [=](const std::vector<double>& p) {
    const Tensor x = unpack(p);
    Tensor dy(oc, out_len);
    dy.data = r;
    Tensor dx(ic, L);
    std::vector<double> g(p.size(), 0.0);
    conv1d_backward(x, std::span<const double>(p.data() + nx, nw), dy, k, pad, dx,
                    std::span<double>(g.data() + nx, nw), std::span<double>(g.data() + nx + nw, oc));
    std::copy(dx.data.begin(), dx.data.end(), g.begin());
    return g;
  };
  return c;
}

inline GradCase node_scale_case(std::mt19937_64& rng) {
  const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
  const auto r = random_vec(rng, n);
  GradCase c;
  c.x = random_vec(rng, 2 * n);
  c.f = [=](const std::vector<double>& p) {
    return dot(node_scale_forward(std::span<const double>(p.data(), n), std::span<const double>(p.data() + n, n)), r);
  };
  c.grad = [=](const std::vector<double>& p) {
    std::vector<double> g(2 * n, 0.0);
    node_scale_backward(std::span<const double>(p.data(), n), std::span<const double>(p.data() + n, n), r,
                        std::span<double>(g.data(), n), std::span<double>(g.data() + n, n));
    return g;
  };
  return c;
}

// Inputs are kept away from the kink so a step of 1e-6 cannot cross it.
inline GradCase relu_case(std::mt19937_64& rng) {
  const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
  const auto r = random_vec(rng, n);
  GradCase c;
  c.x = random_vec(rng, n);
  for (auto& v : c.x)
    if (std::abs(v) < 1e-2) v = v < 0 ? -0.5 : 0.5;
  c.f = [=](const std::vector<double>& p) { return dot(relu_forward(Tensor::vector(p)).data, r); };
  c.grad = [=](const std::vector<double>& p) {
    Tensor dx(1, n), dy = Tensor::vector(r);
    relu_backward(Tensor::vector(p), dy, dx);
    return dx.data;
  };
  return c;
}

// Distinct, well-separated inputs so the argmax is stable under the step.
inline GradCase maxpool_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> ch(1, 3), len(2, 12);
  const std::size_t C = ch(rng), L = len(rng);
  std::vector<double> x(C * L);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * static_cast<double>(i);
  std::shuffle(x.begin(), x.end(), rng);
  const std::size_t out_len = (L - 2) / 2 + 1;
  const auto r = random_vec(rng, C * out_len);
  auto as_tensor = [=](const std::vector<double>& p) {
    Tensor t(C, L);
    t.data = p;
    return t;
  };
  GradCase c;
  c.x = x;
  c.f = [=](const std::vector<double>& p) {
    std::vector<std::size_t> am;
    return dot(maxpool2(as_tensor(p), am).data, r);
  };
  c.grad = [=](const std::vector<double>& p) {
    std::vector<std::size_t> am;
    const auto y = maxpool2(as_tensor(p), am);
    Tensor dy(C, out_len), dx(C, L);
    dy.data = r;
    maxpool_backward(dy, am, dx);
    return dx.data;
  };
  return c;
}

inline GradCase softmax_ce_case(std::mt19937_64& rng) {
  const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
  const int label = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, k - 1)(rng));
  GradCase c;
  c.x = random_vec(rng, k, -3.0, 3.0);
  c.f = [=](const std::vector<double>& p) { return softmax_cross_entropy(p, label).loss; };
  c.grad = [=](const std::vector<double>& p) { return softmax_cross_entropy(p, label).grad; };
  return c;
}

/// A small network chaining every trainable layer type end to end.
inline GradCase network_case(std::mt19937_64& rng) {
  ModelSpec spec;
  spec.name = "gradcheck";
  spec.input_nodes = 12;
  spec.class_count = 3;
  spec.layers = {Aggregate{2}, NodeScale{12}, Conv1d{1, 2, 3}, ReLU{}, MaxPool1d{2, 2}, Dense{12, 5}, ReLU{}, Dense{5, 3}};
  spec.validate();
  const auto base = init_params(spec, rng);
  const int label = static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
  const std::size_t np = base.total();
  auto unpack = [=](const std::vector<double>& p) {
    ParamSet ps = base;
    std::size_t k = 0;
    for (auto& b : ps.blocks)
      for (auto& v : b.values) v = p[k++];
    return std::pair{ps, std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(np), p.end())};
  };
  GradCase c;
  for (const auto& b : base.blocks)
    for (double v : b.values) c.x.push_back(v + 0.1 * std::normal_distribution<double>()(rng));
  const auto feats = random_vec(rng, 12, -2.0, 2.0);
  c.x.insert(c.x.end(), feats.begin(), feats.end());
  c.f = [=](const std::vector<double>& p) {
    auto [ps, f] = unpack(p);
    return softmax_cross_entropy(forward(spec, ps, f), label).loss;
  };
  c.grad = [=](const std::vector<double>& p) {
    auto [ps, f] = unpack(p);
    ForwardCache cache;
    const auto logits = forward(spec, ps, f, &cache);
    auto grads = ps.zeros_like();
    const auto dfeat = backward(spec, ps, cache, softmax_cross_entropy(logits, label).grad, grads);
    std::vector<double> g;
    for (const auto& b : grads.blocks) g.insert(g.end(), b.values.begin(), b.values.end());
    g.insert(g.end(), dfeat.begin(), dfeat.end());
    return g;
  };
  return c;
}

struct GradSuite {
  const char* name;
  GradCase (*make)(std::mt19937_64&);
};

inline const std::vector<GradSuite>& gradient_suites() {
  static const std::vector<GradSuite> s = {{"dense", dense_case},     {"conv1d", conv_case},
                                           {"node_scale", node_scale_case}, {"relu", relu_case},
                                           {"maxpool", maxpool_case}, {"softmax_ce", softmax_ce_case},
                                           {"network", network_case}};
  return s;
}

// ---- suites ----------------------------------------------------------------------

inline SuiteResult projection_suite(std::uint64_t seed, std::size_t cases = 500) {
  SuiteResult res{"projection vs exhaustive", 0, 0, 0.0, 1e-12};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(1, 12);
  for (std::size_t c = 0; c < cases; ++c) {
    const auto v = random_vec(rng, len(rng), -2.0, 2.0);
    for (std::size_t k = 0; k <= v.size(); ++k) {
      ++res.cases;
      const auto p = project_cardinality(v, k);
      const auto ref = exhaustive_projection(v, k);
      const double gap = std::abs(sq_dist(v, p) - sq_dist(v, ref));
      const bool idem = project_cardinality(p, k) == p;
      res.worst = std::max(res.worst, gap);
      if (gap > res.tolerance || !idem || cardinality(p) > k) ++res.failures;
    }
  }
  return res;
}

inline SuiteResult gradient_suite(std::uint64_t seed, std::size_t per_type = 20, double tol = 1e-4) {
  SuiteResult res{"finite-difference gradients", 0, 0, 0.0, tol};
  std::mt19937_64 rng(seed);
  for (const auto& s : gradient_suites())
    for (std::size_t i = 0; i < per_type; ++i) {
      const auto c = s.make(rng);
      const double err = relative_error(c.grad(c.x), numeric_gradient(c.f, c.x));
      ++res.cases;
      res.worst = std::max(res.worst, err);
      if (!(err < tol)) ++res.failures;
    }
  return res;
}

inline SuiteResult aggregation_suite(std::uint64_t seed, std::size_t cases = 50, double tol = 1e-10) {
  SuiteResult res{"sparse vs dense aggregation", 0, 0, 0.0, tol};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> nd(2, 64);
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t n = nd(rng);
    const std::size_t K = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
    const auto z = random_vec(rng, n, 0.0, 1.0);
    const auto g = build_wnfg(z, K);
    const auto h = aggregate(g, 2);
    const auto ref = dense_aggregate(g, 2);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(h[i] - ref[i]) / std::max(1.0, std::abs(ref[i])));
    ++res.cases;
    res.worst = std::max(res.worst, err);
    if (!(err <= tol)) ++res.failures;
  }
  return res;
}

/// Across the dual update the augmented Lagrangian rises by exactly ||d eta||^2 / rho.
inline SuiteResult dual_identity_suite(std::uint64_t seed, std::size_t cases = 200, double tol = 1e-10) {
  SuiteResult res{"dual-step Lagrangian identity", 0, 0, 0.0, tol};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> nd(1, 20);
  std::uniform_real_distribution<double> rho_d(0.01, 10.0);
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t n = nd(rng);
    const double rho = rho_d(rng);
    const auto w = random_vec(rng, n, -2.0, 2.0);
    const auto eta = random_vec(rng, n);
    const std::size_t budget = std::uniform_int_distribution<std::size_t>(0, n)(rng);
    const Omega om;
    const auto z = admm_z_step(w, eta, rho, budget, om);
    const auto eta2 = admm_eta_step(eta, z, w, rho, om);
    auto lag = [&](const std::vector<double>& e) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = z[i] - w[i];
        s += e[i] * r + 0.5 * rho * r * r;
      }
      return s;
    };
    double step = 0.0;
    for (std::size_t i = 0; i < n; ++i) step += (eta2[i] - eta[i]) * (eta2[i] - eta[i]);
    const double err = std::abs((lag(eta2) - lag(eta)) - step / rho) / std::max(1.0, step / rho);
    ++res.cases;
    res.worst = std::max(res.worst, err);
    if (!(err <= tol)) ++res.failures;
  }
  return res;
}

inline std::vector<SuiteResult> run_all(std::uint64_t seed) {
  return {projection_suite(seed), gradient_suite(seed + 1), aggregation_suite(seed + 2),
          dual_identity_suite(seed + 3)};
}

}  // namespace ssgc::verify
