#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "model.hpp"

namespace ssgc {

struct AdamState {
  ParamSet m, v;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(const ParamSet& like) : m(like.zeros_like()), v(like.zeros_like()) {}

  /// Fresh moments, same shapes.
  void reset() {
    m.set_zero();
    v.set_zero();
    step = 0;
  }
};

/// One bias-corrected Adam update of every block.
inline void adam_step(ParamSet& params, const ParamSet& grads, AdamState& st, double lr) {
  if (grads.blocks.size() != params.blocks.size() || st.m.blocks.size() != params.blocks.size())
    throw std::invalid_argument("adam_step: block count mismatch");
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    auto& w = params.blocks[b].values;
    const auto& g = grads.blocks[b].values;
    auto& m = st.m.blocks[b].values;
    auto& v = st.v.blocks[b].values;
    if (g.size() != w.size() || m.size() != w.size()) throw std::invalid_argument("adam_step: block shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + st.eps);
    }
  }
}

}  // namespace ssgc
