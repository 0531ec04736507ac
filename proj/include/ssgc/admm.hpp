#pragma once
// ADMM splitting for cardinality-constrained training.
//
//   min f(w) + sum_l g(z_l)   s.t.  z_l = Omega w_l,   g = indicator{card(z) <= budget}
//
// w-step: inexact minimisation of f(w) + sum_l eta_l^T (z_l - Omega w_l) + rho/2 |z_l - Omega w_l|^2
// z-step: z_l = Pi(Omega w_l - eta_l / rho)        (current dual)
// eta-step: eta_l += rho (z_l - Omega w_l)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adam.hpp"
#include "model.hpp"

namespace ssgc {

/// Per-layer cardinality budget: ceil(rate * count), guarded against
/// products that land a rounding error above an integer.
inline std::size_t budget_for(std::size_t count, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("connection rate must be in (0,1]");
  const double x = rate * static_cast<double>(count);
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

/// Keeps the `budget` largest-magnitude entries verbatim, zeroes the rest.
/// Ties go to the lower index.
inline std::vector<double> project_cardinality(std::span<const double> v, std::size_t budget) {
  std::vector<double> out(v.size(), 0.0);
  if (budget >= v.size()) {
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }
  if (budget == 0) return out;
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto before = [&](std::size_t a, std::size_t b) {
    const double fa = std::abs(v[a]), fb = std::abs(v[b]);
    return fa > fb || (fa == fb && a < b);
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(budget - 1), idx.end(), before);
  for (std::size_t k = 0; k < budget; ++k) out[idx[k]] = v[idx[k]];
  return out;
}

inline std::size_t cardinality(std::span<const double> v) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; }));
}

/// Linear operator Omega. Empty `diag` is the identity; otherwise a diagonal
/// scaling (full rank when every entry is nonzero, support preserving).
struct Omega {
  std::vector<double> diag;

  bool is_identity() const noexcept { return diag.empty(); }

  std::vector<double> apply(std::span<const double> w) const {
    std::vector<double> out(w.begin(), w.end());
    if (!is_identity())
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= diag[i];
    return out;
  }
  std::vector<double> apply_transpose(std::span<const double> v) const { return apply(v); }

  /// Largest kappa with Omega Omega^T >= kappa^2 I.
  double kappa() const {
    if (is_identity()) return 1.0;
    double k = std::numeric_limits<double>::infinity();
    for (double d : diag) k = std::min(k, std::abs(d));
    return k;
  }
};

enum class PruneMethod { Admm, Magnitude };

struct PruneConfig {
  double connection_rate = 0.1;
  double rho = 1e-2;
  PruneMethod method = PruneMethod::Admm;
  /// ADMM cycles per stage per epoch ("while not convergent" cap).
  std::size_t admm_outer_iters = 1;
  std::size_t w_inner_steps = 30;
  std::size_t retrain_epochs = 10;
  /// First epoch with ADMM active; negative means half of max_epochs.
  long admm_start_epoch = -1;
  double residual_tol = 1e-4;
  bool include_bias = false;
  bool include_node_scale = false;

  void validate() const {
    if (!(connection_rate > 0.0 && connection_rate <= 1.0))
      throw std::invalid_argument("prune.connection_rate must be in (0,1]");
    if (!(rho > 0.0)) throw std::invalid_argument("prune.rho must be > 0");
    if (admm_outer_iters == 0) throw std::invalid_argument("prune.admm_outer_iters must be > 0");
  }
};

/// Which phase of the network a block belongs to: convolutional front end
/// (including node scaling) or the dense read-out.
enum class Stage { Conv, Fc };

inline Stage stage_of(const ModelSpec& spec, std::size_t layer) {
  return std::holds_alternative<Dense>(spec.layers[layer]) ? Stage::Fc : Stage::Conv;
}

struct LayerPruneState {
  std::size_t block = 0;  // index into ParamSet::blocks
  Stage stage = Stage::Conv;
  std::size_t budget = 0;
  Omega omega;
  std::vector<double> z;
  std::vector<double> eta;
};

struct PruneState {
  double rho = 1.0;
  std::vector<LayerPruneState> layers;
};

/// Blocks subject to the cardinality constraint under `cfg`.
inline std::vector<std::size_t> prunable_blocks(const ParamSet& params, const PruneConfig& cfg) {
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const auto k = params.blocks[b].kind;
    if (k == BlockKind::Weight || (k == BlockKind::Bias && cfg.include_bias) ||
        (k == BlockKind::NodeScale && cfg.include_node_scale))
      out.push_back(b);
  }
  return out;
}

/// z = Pi(Omega w), eta = 0 for every prunable block.
inline PruneState init_prune_state(const ModelSpec& spec, const ParamSet& params, const PruneConfig& cfg) {
  cfg.validate();
  PruneState st;
  st.rho = cfg.rho;
  for (auto b : prunable_blocks(params, cfg)) {
    LayerPruneState l;
    l.block = b;
    l.stage = stage_of(spec, params.blocks[b].layer);
    l.budget = budget_for(params.blocks[b].values.size(), cfg.connection_rate);
    l.z = project_cardinality(l.omega.apply(params.blocks[b].values), l.budget);
    l.eta.assign(l.z.size(), 0.0);
    st.layers.push_back(std::move(l));
  }
  return st;
}

// ---- elementary steps ------------------------------------------------------------

inline std::vector<double> admm_z_step(std::span<const double> w, std::span<const double> eta, double rho,
                                       std::size_t budget, const Omega& omega = {}) {
  if (!(rho > 0.0)) throw std::invalid_argument("admm_z_step: rho must be > 0");
  auto arg = omega.apply(w);
  for (std::size_t i = 0; i < arg.size(); ++i) arg[i] -= eta[i] / rho;
  return project_cardinality(arg, budget);
}

inline std::vector<double> admm_eta_step(std::span<const double> eta, std::span<const double> z,
                                         std::span<const double> w, double rho, const Omega& omega = {}) {
  if (eta.size() != z.size() || z.size() != w.size()) throw std::invalid_argument("admm_eta_step: shape mismatch");
  const auto ow = omega.apply(w);
  std::vector<double> out(eta.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = eta[i] + rho * (z[i] - ow[i]);
  return out;
}

/// Sum over layers of eta^T (z - Omega w) + rho/2 |z - Omega w|^2.
inline double penalty_value(const PruneState& st, const ParamSet& params) {
  double acc = 0.0;
  for (const auto& l : st.layers) {
    const auto ow = l.omega.apply(params.blocks[l.block].values);
    for (std::size_t i = 0; i < ow.size(); ++i) {
      const double r = l.z[i] - ow[i];
      acc += l.eta[i] * r + 0.5 * st.rho * r * r;
    }
  }
  return acc;
}

/// grads += rho Omega^T (Omega w - z - eta/rho) for every constrained block.
inline void add_penalty_gradient(const PruneState& st, const ParamSet& params, ParamSet& grads) {
  for (const auto& l : st.layers) {
    auto r = l.omega.apply(params.blocks[l.block].values);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = st.rho * (r[i] - l.z[i]) - l.eta[i];
    const auto g = l.omega.apply_transpose(r);
    auto& dst = grads.blocks[l.block].values;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
}

/// Augmented Lagrangian; +infinity when some z exceeds its budget.
inline double lagrangian_value(double loss, const PruneState& st, const ParamSet& params) {
  for (const auto& l : st.layers)
    if (cardinality(l.z) > l.budget) return std::numeric_limits<double>::infinity();
  return loss + penalty_value(st, params);
}

inline double primal_residual(const LayerPruneState& l, const ParamSet& params) {
  const auto ow = l.omega.apply(params.blocks[l.block].values);
  double s = 0.0;
  for (std::size_t i = 0; i < ow.size(); ++i) s += (l.z[i] - ow[i]) * (l.z[i] - ow[i]);
  return std::sqrt(s);
}

// ---- diagnostics ------------------------------------------------------------------

struct AdmmRecord {
  std::size_t iteration = 0;
  std::string stage;
  double loss = 0.0;
  double lagrangian = 0.0;           // after the dual update
  double lagrangian_pre_dual = 0.0;  // after the z-step, before the dual update
  double dual_step_norm = 0.0;       // |eta^(k+1) - eta^(k)| over the stage's layers
  std::vector<double> residuals;     // |z_l - Omega w_l| per constrained layer
};

struct AdmmTrace {
  std::vector<AdmmRecord> records;

  void write_csv(std::ostream& os) const {
    os << "iteration,stage,loss,lagrangian,lagrangian_pre_dual,dual_step_norm";
    const std::size_t nl = records.empty() ? 0 : records.front().residuals.size();
    for (std::size_t l = 0; l < nl; ++l) os << ",residual_" << l;
    os << '\n';
    os.precision(17);
    for (const auto& r : records) {
      os << r.iteration << ',' << r.stage << ',' << r.loss << ',' << r.lagrangian << ',' << r.lagrangian_pre_dual
         << ',' << r.dual_step_norm;
      for (double v : r.residuals) os << ',' << v;
      os << '\n';
    }
  }
};

// ---- w-step --------------------------------------------------------------------------

/// `steps` Adam updates on the penalised objective. `loss_grad(params, grads)`
/// must fill `grads` (already zeroed) with the loss gradient on its next batch
/// and return the batch loss.
template <class LossGrad>
void admm_w_step(ParamSet& params, AdamState& adam, const PruneState& st, std::size_t steps, double lr,
                 LossGrad&& loss_grad, const std::vector<std::vector<std::uint8_t>>* masks = nullptr) {
  ParamSet grads = params.zeros_like();
  for (std::size_t s = 0; s < steps; ++s) {
    grads.set_zero();
    const double loss = loss_grad(static_cast<const ParamSet&>(params), grads);
    if (!std::isfinite(loss)) throw std::runtime_error("admm_w_step: non-finite loss at inner step " + std::to_string(s));
    add_penalty_gradient(st, params, grads);
    if (masks)
      for (std::size_t b = 0; b < grads.blocks.size(); ++b)
        if (!(*masks)[b].empty())
          for (std::size_t i = 0; i < grads.blocks[b].values.size(); ++i)
            if (!(*masks)[b][i]) grads.blocks[b].values[i] = 0.0;
    adam_step(params, grads, adam, lr);
  }
}

/// z- and eta-updates for the layers of one stage (all layers when `stage`
/// is empty). Returns the trace record; `loss_at` evaluates f(w).
template <class LossAt>
AdmmRecord admm_dual_cycle(PruneState& st, const ParamSet& params, std::optional<Stage> stage, LossAt&& loss_at,
                           std::size_t iteration) {
  AdmmRecord rec;
  rec.iteration = iteration;
  rec.stage = !stage ? "all" : (*stage == Stage::Conv ? "conv" : "fc");
  double dual_sq = 0.0;
  for (auto& l : st.layers) {
    if (stage && l.stage != *stage) continue;
    const auto& w = params.blocks[l.block].values;
    l.z = admm_z_step(w, l.eta, st.rho, l.budget, l.omega);
    if (cardinality(l.z) > l.budget) throw std::logic_error("admm: projection exceeded its budget");
  }
  rec.loss = loss_at(params);
  rec.lagrangian_pre_dual = lagrangian_value(rec.loss, st, params);
  for (auto& l : st.layers) {
    if (stage && l.stage != *stage) continue;
    const auto next = admm_eta_step(l.eta, l.z, params.blocks[l.block].values, st.rho, l.omega);
    for (std::size_t i = 0; i < next.size(); ++i) dual_sq += (next[i] - l.eta[i]) * (next[i] - l.eta[i]);
    l.eta = next;
  }
  rec.dual_step_norm = std::sqrt(dual_sq);
  rec.lagrangian = lagrangian_value(rec.loss, st, params);
  for (const auto& l : st.layers) rec.residuals.push_back(primal_residual(l, params));
  return rec;
}

// ---- masking ---------------------------------------------------------------------------

/// One entry per ParamSet block; empty means unconstrained.
using MaskSet = std::vector<std::vector<std::uint8_t>>;

inline void apply_masks(ParamSet& params, const MaskSet& masks) {
  for (std::size_t b = 0; b < params.blocks.size() && b < masks.size(); ++b)
    if (!masks[b].empty())
      for (std::size_t i = 0; i < masks[b].size(); ++i)
        if (!masks[b][i]) params.blocks[b].values[i] = 0.0;
}

/// Zeroes weights outside support(z) and records the masks.
inline MaskSet hard_mask_and_freeze(ParamSet& params, const PruneState& st) {
  MaskSet masks(params.blocks.size());
  for (const auto& l : st.layers) {
    auto& m = masks[l.block];
    m.assign(l.z.size(), 0);
    for (std::size_t i = 0; i < l.z.size(); ++i) m[i] = l.z[i] != 0.0;
  }
  apply_masks(params, masks);
  return masks;
}

/// One-shot per-block top-|w| pruning with the same budget rule. Masks mark
/// the kept positions, so the mask count equals the budget even when a kept
/// weight is exactly zero.
inline MaskSet magnitude_prune_baseline(ParamSet& params, const PruneConfig& cfg) {
  MaskSet masks(params.blocks.size());
  for (auto b : prunable_blocks(params, cfg)) {
    auto& vals = params.blocks[b].values;
    const auto budget = std::min(budget_for(vals.size(), cfg.connection_rate), vals.size());
    std::vector<std::size_t> order(vals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return std::abs(vals[a]) > std::abs(vals[c]); });
    masks[b].assign(vals.size(), 0);
    for (std::size_t k = 0; k < budget; ++k) masks[b][order[k]] = 1;
  }
  apply_masks(params, masks);
  return masks;
}

inline std::size_t count_unmasked(const MaskSet& masks) {
  std::size_t n = 0;
  for (const auto& m : masks)
    for (auto v : m) n += v;
  return n;
}

}  // namespace ssgc
