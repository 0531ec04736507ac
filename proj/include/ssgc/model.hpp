#pragma once
// Model descriptions, parameter storage, parameter accounting and the full
// forward/backward pass.

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "layers.hpp"

namespace ssgc {

struct Aggregate {
  std::size_t hops = 2;
  bool unweighted = false;
  /// Count the per-hop aggregation vectors (hops x n) as non-trainable buffers.
  bool count_buffers = false;
};
struct NodeScale {
  std::size_t n = 0;
};
struct Conv1d {
  std::size_t in_ch = 1, out_ch = 1, kernel = 3;
  std::size_t stride = 1;
  bool zero_pad = true;
};
struct MaxPool1d {
  std::size_t width = 2, stride = 2;
};
struct Dense {
  std::size_t in_dim = 0, out_dim = 0;
};
struct ReLU {};

using LayerSpec = std::variant<Aggregate, NodeScale, Conv1d, MaxPool1d, Dense, ReLU>;

struct ModelSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::size_t class_count = 2;
  std::size_t input_nodes = 0;

  /// Throws std::invalid_argument naming the first incompatible layer.
  void validate() const;
  /// Hops of the leading aggregation stage.
  const Aggregate& input_stage() const;
  /// Stable text form, used for the checkpoint digest.
  std::string canonical() const;
  std::uint64_t digest() const;
};

// ---- presets -----------------------------------------------------------------

/// SSGCNet: two-hop aggregation, node scaling, four conv/pool stages and two
/// dense layers. Widths give 47282 counted parameters at n=256.
inline ModelSpec ssgcnet_spec(std::size_t n = 256, std::size_t classes = 2) {
  ModelSpec m;
  m.name = "ssgcnet";
  m.class_count = classes;
  m.input_nodes = n;
  m.layers = {Aggregate{2, false, false}, NodeScale{n}};
  const std::size_t widths[] = {8, 16, 32, 32};
  const std::size_t kernels[] = {3, 3, 9, 9};
  std::size_t ch = 1, len = n;
  for (int s = 0; s < 4; ++s) {
    m.layers.push_back(Conv1d{ch, widths[s], kernels[s]});
    m.layers.push_back(ReLU{});
    m.layers.push_back(MaxPool1d{2, 2});
    ch = widths[s];
    len /= 2;
  }
  m.layers.push_back(Dense{ch * len, 64});
  m.layers.push_back(ReLU{});
  m.layers.push_back(Dense{64, classes});
  return m;
}

namespace detail {
inline void push_mlp(ModelSpec& m, std::size_t in, std::initializer_list<std::size_t> hidden) {
  for (auto h : hidden) {
    m.layers.push_back(Dense{in, h});
    m.layers.push_back(ReLU{});
    in = h;
  }
  m.layers.push_back(Dense{in, m.class_count});
}
}  // namespace detail

/// GNN baseline: two-hop aggregation (buffers counted) then five dense layers.
inline ModelSpec gnn_spec(std::size_t n = 256, std::size_t classes = 2) {
  ModelSpec m;
  m.name = "gnn";
  m.class_count = classes;
  m.input_nodes = n;
  m.layers = {Aggregate{2, false, true}};
  detail::push_mlp(m, n, {128, 64, 32, 16});
  return m;
}

/// Four-layer MLP used in the pruning experiments (hidden width 200). Reads
/// the one-hop aggregation of the graph.
inline ModelSpec mlp_spec(std::size_t n = 256, std::size_t classes = 2, std::size_t hidden = 200) {
  ModelSpec m;
  m.name = "mlp";
  m.class_count = classes;
  m.input_nodes = n;
  m.layers = {Aggregate{1, false, false}};
  detail::push_mlp(m, n, {hidden, hidden, hidden});
  return m;
}

/// Five-layer MLP of the model comparison.
inline ModelSpec mlp5_spec(std::size_t n = 256, std::size_t classes = 2) {
  ModelSpec m;
  m.name = "mlp5";
  m.class_count = classes;
  m.input_nodes = n;
  m.layers = {Aggregate{1, false, false}};
  detail::push_mlp(m, n, {128, 64, 32, 16});
  return m;
}

inline ModelSpec model_by_name(const std::string& name, std::size_t n, std::size_t classes) {
  if (name == "ssgcnet") return ssgcnet_spec(n, classes);
  if (name == "gnn") return gnn_spec(n, classes);
  if (name == "mlp") return mlp_spec(n, classes);
  if (name == "mlp5") return mlp5_spec(n, classes);
  throw std::invalid_argument("unknown model '" + name + "' (expected ssgcnet, gnn, mlp, mlp5)");
}

// ---- shape inference -----------------------------------------------------------

inline const Aggregate& ModelSpec::input_stage() const {
  if (layers.empty() || !std::holds_alternative<Aggregate>(layers.front()))
    throw std::invalid_argument("model '" + name + "': first layer must be Aggregate");
  return std::get<Aggregate>(layers.front());
}

inline void ModelSpec::validate() const {
  auto fail = [&](std::size_t i, const std::string& why) {
    throw std::invalid_argument("model '" + name + "' layer " + std::to_string(i) + ": " + why);
  };
  if (class_count < 2) throw std::invalid_argument("model '" + name + "': class_count must be >= 2");
  if (input_nodes < 2) throw std::invalid_argument("model '" + name + "': input_nodes must be >= 2");
  if (input_stage().hops < 1) fail(0, "hops must be >= 1");
  std::size_t ch = 1, len = input_nodes;
  const Dense* last_dense = nullptr;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          last_dense = nullptr;
          if constexpr (std::is_same_v<L, Aggregate>) {
            fail(i, "Aggregate is only allowed as the first layer");
          } else if constexpr (std::is_same_v<L, NodeScale>) {
            if (ch != 1 || len != l.n) fail(i, "NodeScale size does not match node count");
          } else if constexpr (std::is_same_v<L, Conv1d>) {
            if (l.in_ch != ch) fail(i, "Conv1d in_ch does not match incoming channels");
            if (l.out_ch == 0 || l.kernel == 0) fail(i, "Conv1d dimensions must be positive");
            if (l.stride != 1) fail(i, "Conv1d only supports stride 1");
            if (l.zero_pad && l.kernel % 2 == 0) fail(i, "length-preserving Conv1d needs an odd kernel");
            const std::size_t pad = l.zero_pad ? (l.kernel - 1) / 2 : 0;
            if (len + 2 * pad < l.kernel) fail(i, "Conv1d kernel longer than input");
            len = len + 2 * pad - l.kernel + 1;
            ch = l.out_ch;
          } else if constexpr (std::is_same_v<L, MaxPool1d>) {
            if (l.width == 0 || l.stride == 0 || len < l.width) fail(i, "MaxPool1d window does not fit");
            len = (len - l.width) / l.stride + 1;
          } else if constexpr (std::is_same_v<L, Dense>) {
            if (l.in_dim != ch * len) fail(i, "Dense in_dim does not match flattened input");
            if (l.out_dim == 0) fail(i, "Dense out_dim must be positive");
            ch = 1;
            len = l.out_dim;
            last_dense = &l;
          }
        },
        layers[i]);
  }
  if (!last_dense || last_dense->out_dim != class_count)
    throw std::invalid_argument("model '" + name + "': final layer must be Dense with out_dim = class_count");
}

inline std::string ModelSpec::canonical() const {
  std::ostringstream os;
  os << name << ";c=" << class_count << ";n=" << input_nodes;
  for (const auto& layer : layers)
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Aggregate>)
            os << ";agg(" << l.hops << ',' << l.unweighted << ',' << l.count_buffers << ')';
          else if constexpr (std::is_same_v<L, NodeScale>)
            os << ";scale(" << l.n << ')';
          else if constexpr (std::is_same_v<L, Conv1d>)
            os << ";conv(" << l.in_ch << ',' << l.out_ch << ',' << l.kernel << ',' << l.stride << ','
               << l.zero_pad << ')';
          else if constexpr (std::is_same_v<L, MaxPool1d>)
            os << ";pool(" << l.width << ',' << l.stride << ')';
          else if constexpr (std::is_same_v<L, Dense>)
            os << ";dense(" << l.in_dim << ',' << l.out_dim << ')';
          else
            os << ";relu";
        },
        layer);
  return os.str();
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t ModelSpec::digest() const { return fnv1a64(canonical()); }

// ---- parameters ----------------------------------------------------------------

enum class BlockKind : std::uint8_t { Weight = 0, Bias = 1, NodeScale = 2 };

inline const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::Weight: return "weight";
    case BlockKind::Bias: return "bias";
    case BlockKind::NodeScale: return "node_scale";
  }
  return "?";
}

struct ParamBlock {
  std::string name;
  BlockKind kind = BlockKind::Weight;
  std::size_t layer = 0;
  std::vector<double> values;

  bool operator==(const ParamBlock&) const = default;
};

/// Blocks appear in layer order; Conv1d/Dense contribute weight then bias.
struct ParamSet {
  std::vector<ParamBlock> blocks;

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& b : blocks) t += b.values.size();
    return t;
  }
  ParamSet zeros_like() const {
    ParamSet z = *this;
    for (auto& b : z.blocks) std::fill(b.values.begin(), b.values.end(), 0.0);
    return z;
  }
  void set_zero() {
    for (auto& b : blocks) std::fill(b.values.begin(), b.values.end(), 0.0);
  }
  std::size_t count_nonzero(BlockKind kind) const {
    std::size_t n = 0;
    for (const auto& b : blocks)
      if (b.kind == kind)
        for (double v : b.values) n += v != 0.0;
    return n;
  }
  bool all_finite() const {
    for (const auto& b : blocks)
      for (double v : b.values)
        if (!std::isfinite(v)) return false;
    return true;
  }
  bool operator==(const ParamSet&) const = default;
};

/// Allocates blocks with He-uniform weights, zero biases and unit node scales.
inline ParamSet init_params(const ModelSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  ParamSet p;
  auto uniform_block = [&](std::size_t count, std::size_t fan_in) {
    std::vector<double> v(count);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : v) x = dist(rng);
    return v;
  };
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string tag = "L" + std::to_string(i);
    if (const auto* s = std::get_if<NodeScale>(&spec.layers[i])) {
      p.blocks.push_back({tag + ".theta", BlockKind::NodeScale, i, std::vector<double>(s->n, 1.0)});
    } else if (const auto* c = std::get_if<Conv1d>(&spec.layers[i])) {
      p.blocks.push_back({tag + ".conv.w", BlockKind::Weight, i,
                          uniform_block(c->out_ch * c->in_ch * c->kernel, c->in_ch * c->kernel)});
      p.blocks.push_back({tag + ".conv.b", BlockKind::Bias, i, std::vector<double>(c->out_ch, 0.0)});
    } else if (const auto* d = std::get_if<Dense>(&spec.layers[i])) {
      p.blocks.push_back({tag + ".dense.w", BlockKind::Weight, i, uniform_block(d->out_dim * d->in_dim, d->in_dim)});
      p.blocks.push_back({tag + ".dense.b", BlockKind::Bias, i, std::vector<double>(d->out_dim, 0.0)});
    }
  }
  return p;
}

// ---- parameter accounting --------------------------------------------------------

struct LayerCount {
  std::size_t layer = 0;  // index into ModelSpec::layers
  std::string label;      // "conv" or "dense"
  std::size_t weights = 0;
  std::size_t biases = 0;
};

/// One row per weight-bearing layer (weights only), a non-train bucket holding
/// biases and declared aggregation buffers, and the node-scale vector apart.
struct ParamCount {
  std::vector<LayerCount> layers;
  std::size_t biases = 0;
  std::size_t buffers = 0;
  std::size_t node_scale = 0;

  std::size_t weights() const {
    std::size_t t = 0;
    for (const auto& l : layers) t += l.weights;
    return t;
  }
  std::size_t non_train() const { return biases + buffers; }
  std::size_t total() const { return weights() + non_train(); }
  /// Every parameter the optimiser updates.
  std::size_t trainable() const { return weights() + biases + node_scale; }
};

inline ParamCount count_params(const ModelSpec& spec) {
  spec.validate();
  ParamCount pc;
  const auto& agg = spec.input_stage();
  if (agg.count_buffers) pc.buffers = agg.hops * spec.input_nodes;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (const auto* s = std::get_if<NodeScale>(&spec.layers[i])) {
      pc.node_scale += s->n;
    } else if (const auto* c = std::get_if<Conv1d>(&spec.layers[i])) {
      pc.layers.push_back({i, "conv", c->out_ch * c->in_ch * c->kernel, c->out_ch});
      pc.biases += c->out_ch;
    } else if (const auto* d = std::get_if<Dense>(&spec.layers[i])) {
      pc.layers.push_back({i, "dense", d->out_dim * d->in_dim, d->out_dim});
      pc.biases += d->out_dim;
    }
  }
  return pc;
}

// ---- forward / backward ------------------------------------------------------------

/// Input features of a graph: the model's leading aggregation stage.
inline std::vector<double> input_features(const ModelSpec& spec, const SparseGraph& g) {
  const auto& agg = spec.input_stage();
  if (g.n != spec.input_nodes)
    throw std::invalid_argument("graph has " + std::to_string(g.n) + " nodes, model expects " +
                                std::to_string(spec.input_nodes));
  return aggregate(g, agg.hops, agg.unweighted);
}

/// Activations kept for the backward pass: inputs[i] is the input of layer i
/// (inputs[0] unused, the aggregation stage runs outside the pass).
struct ForwardCache {
  std::vector<Tensor> inputs;
  std::vector<std::vector<std::size_t>> argmax;
};

/// Runs layers 1.. on a 1 x n feature vector; returns logits.
inline std::vector<double> forward(const ModelSpec& spec, const ParamSet& params, const std::vector<double>& features,
                                   ForwardCache* cache = nullptr) {
  Tensor x = Tensor::vector(features);
  if (cache) {
    cache->inputs.assign(spec.layers.size(), Tensor{});
    cache->argmax.assign(spec.layers.size(), {});
  }
  std::size_t blk = 0;
  for (std::size_t i = 1; i < spec.layers.size(); ++i) {
    if (cache) cache->inputs[i] = x;
    const auto& layer = spec.layers[i];
    if (std::holds_alternative<NodeScale>(layer)) {
      x.data = node_scale_forward(x.data, params.blocks[blk++].values);
    } else if (const auto* c = std::get_if<Conv1d>(&layer)) {
      const auto& w = params.blocks[blk++].values;
      const auto& b = params.blocks[blk++].values;
      x = conv1d_forward(x, w, b, c->out_ch, c->kernel, c->zero_pad);
    } else if (const auto* p = std::get_if<MaxPool1d>(&layer)) {
      std::vector<std::size_t> am;
      x = maxpool_forward(x, p->width, p->stride, am);
      if (cache) cache->argmax[i] = std::move(am);
    } else if (const auto* d = std::get_if<Dense>(&layer)) {
      const auto& w = params.blocks[blk++].values;
      const auto& b = params.blocks[blk++].values;
      x = Tensor::vector(dense_forward(x.data, w, b));
      (void)d;
    } else if (std::holds_alternative<ReLU>(layer)) {
      x = relu_forward(std::move(x));
    }
  }
  return x.data;
}

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
/// Returns the gradient with respect to the input features.
inline std::vector<double> backward(const ModelSpec& spec, const ParamSet& params, const ForwardCache& cache,
                                    const std::vector<double>& dlogits, ParamSet& grads) {
  std::size_t blk = params.blocks.size();
  Tensor dy = Tensor::vector(dlogits);
  for (std::size_t i = spec.layers.size() - 1; i >= 1; --i) {
    const auto& layer = spec.layers[i];
    const Tensor& x = cache.inputs[i];
    Tensor dx(x.channels, x.length);
    if (std::holds_alternative<NodeScale>(layer)) {
      --blk;
      node_scale_backward(x.data, params.blocks[blk].values, dy.data, dx.data, grads.blocks[blk].values);
    } else if (const auto* c = std::get_if<Conv1d>(&layer)) {
      blk -= 2;
      conv1d_backward(x, params.blocks[blk].values, dy, c->kernel, c->zero_pad, dx, grads.blocks[blk].values,
                      grads.blocks[blk + 1].values);
    } else if (std::holds_alternative<MaxPool1d>(layer)) {
      maxpool_backward(dy, cache.argmax[i], dx);
    } else if (std::holds_alternative<Dense>(layer)) {
      blk -= 2;
      dense_backward(x.data, params.blocks[blk].values, dy.data, dx.data, grads.blocks[blk].values,
                     grads.blocks[blk + 1].values);
    } else if (std::holds_alternative<ReLU>(layer)) {
      relu_backward(x, dy, dx);
    }
    dy = std::move(dx);
  }
  return dy.data;
}

}  // namespace ssgc
