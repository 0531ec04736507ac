#pragma once
// End-to-end training: graphs are built once, then each epoch runs the
// forward/backward pass with optional ADMM pruning cycles after the conv and
// dense stages, followed by hard masking and retraining.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "admm.hpp"
#include "dataset.hpp"
#include "loss.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "wnfg.hpp"

namespace ssgc {

inline constexpr const char* kToolVersion = "0.3.0";

struct TaskSpec {
  std::string dataset = "synth";  // synth | bonn | csv | spectra
  std::string data_path;
  std::vector<std::string> classes = {"A", "E"};
  std::size_t seg_len = 256;
  std::size_t overlap = 0;
  WnfgConfig graph = WnfgConfig::with_rate(0.1);
  std::string model = "ssgcnet";
  std::uint64_t seed = 1;
  double train_ratio = 0.8;
  int positive_label = 1;
  bool half_spectrum = false;
  std::size_t synth_per_class = 200;
  double synth_noise = 0.5;
  double sample_rate = kBonnSampleRate;
};

struct TrainConfig {
  std::size_t max_epochs = 50;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::optional<PruneConfig> prune;
  std::size_t eval_every = 1;
  bool deterministic = true;
  std::size_t threads = 1;
  FeatureTransform feature_transform = FeatureTransform::LogStandardize;
  bool unweighted_aggregation = false;

  void validate() const {
    if (max_epochs == 0) throw std::invalid_argument("max_epochs must be > 0");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be > 0");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (eval_every == 0) throw std::invalid_argument("eval_every must be > 0");
    if (prune) prune->validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string phase;  // train | admm | retrain
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t nonzero_weights = 0;
};

struct LayerRow {
  std::size_t layer = 0;
  std::string label;
  std::size_t total = 0;
  std::size_t budget = 0;
  std::size_t surviving = 0;
};

struct GraphSummary {
  std::size_t graphs = 0;
  std::size_t n = 0;
  std::size_t K = 0;
  std::size_t nnz = 0;    // summed over the corpus
  std::size_t bytes = 0;  // summed over the corpus
  double build_seconds = 0.0;
};

struct RunReport {
  TaskSpec task;
  TrainConfig config;
  std::string model;
  std::string status = "ok";  // ok | diverged
  std::string error;
  std::vector<EpochRecord> curves;
  Metrics final_metrics;
  ParamCount counts;
  std::vector<LayerRow> layers;
  std::size_t surviving_weights = 0;
  AdmmTrace trace;
  GraphSummary graph;
  double seconds_prepare = 0.0;
  double seconds_train = 0.0;
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  std::string timestamp;

  /// Surviving weights plus the non-train bucket.
  std::size_t surviving_total() const { return surviving_weights + counts.non_train(); }
};

// ---- data preparation ---------------------------------------------------------

inline std::vector<Spectrum> load_task_spectra(const TaskSpec& task) {
  if (task.dataset == "synth")
    return make_synthetic_spectra({task.seg_len, task.synth_per_class, task.synth_noise, task.seed});
  if (task.dataset == "bonn") {
    if (task.data_path.empty()) throw std::runtime_error("dataset missing: bonn task needs a data path");
    return load_bonn_spectra(task.data_path, task.classes, task.seg_len, task.overlap, task.half_spectrum);
  }
  if (task.dataset == "csv") {
    if (task.data_path.empty()) throw std::runtime_error("dataset missing: csv task needs a data path");
    return load_csv_spectra(task.data_path, task.seg_len, task.overlap, task.sample_rate, task.half_spectrum);
  }
  if (task.dataset == "spectra") {
    if (task.data_path.empty()) throw std::runtime_error("dataset missing: spectra task needs a cache path");
    return read_spectra_csv(task.data_path);
  }
  throw std::invalid_argument("unknown dataset '" + task.dataset + "' (expected synth, bonn, csv, spectra)");
}

inline std::size_t class_count_of(const std::vector<Spectrum>& spectra) {
  int mx = 0;
  for (const auto& s : spectra) mx = std::max(mx, s.label);
  return static_cast<std::size_t>(mx) + 1;
}

struct PreparedData {
  std::vector<SparseGraph> graphs;
  std::vector<std::vector<double>> features;  // scaled model inputs
  std::vector<int> labels;
  Split split;
  GraphSummary graph;
};

/// Builds every graph once and derives the model inputs.
inline PreparedData prepare_data(const std::vector<Spectrum>& spectra, const TaskSpec& task, const ModelSpec& spec,
                                 const TrainConfig& cfg) {
  if (spectra.empty()) throw std::runtime_error("dataset missing: no segments produced");
  PreparedData d;
  const std::size_t n = spectra.front().size();
  d.graph.n = n;
  d.graph.K = task.graph.resolve(n);
  d.graph.graphs = spectra.size();
  d.graphs.reserve(spectra.size());
  for (const auto& s : spectra) {
    if (s.size() != n) throw std::runtime_error("spectra of unequal length in one task");
    auto [g, st] = build_wnfg_timed(s, d.graph.K);
    d.graph.nnz += st.nnz;
    d.graph.bytes += st.bytes;
    d.graph.build_seconds += st.build_seconds;
    d.labels.push_back(s.label);
    d.graphs.push_back(std::move(g));
  }
  const auto& agg = spec.input_stage();
  const bool unweighted = agg.unweighted || cfg.unweighted_aggregation;
  d.features.reserve(d.graphs.size());
  for (const auto& g : d.graphs) {
    if (g.n != spec.input_nodes)
      throw std::invalid_argument("graph has " + std::to_string(g.n) + " nodes, model expects " +
                                  std::to_string(spec.input_nodes));
    d.features.push_back(aggregate(g, agg.hops, unweighted));
  }
  d.split = stratified_split(d.labels, task.train_ratio, task.seed);
  FeatureScaler scaler{cfg.feature_transform, {}, {}};
  scaler.fit(d.features, d.split.train);
  for (auto& f : d.features) f = scaler.apply(std::move(f));
  return d;
}

// ---- trainer ---------------------------------------------------------------------

/// Endless stream of shuffled minibatches over a fixed row set.
class BatchStream {
 public:
  BatchStream(std::vector<std::size_t> rows, std::size_t batch, std::mt19937_64& rng)
      : rows_(std::move(rows)), batch_(batch), rng_(rng) {
    std::shuffle(rows_.begin(), rows_.end(), rng_);
  }
  std::vector<std::size_t> next() {
    std::vector<std::size_t> out;
    while (out.size() < batch_ && !rows_.empty()) {
      if (pos_ == rows_.size()) {
        pos_ = 0;
        std::shuffle(rows_.begin(), rows_.end(), rng_);
        if (!out.empty()) break;
      }
      out.push_back(rows_[pos_++]);
    }
    return out;
  }
  std::size_t batches_per_epoch() const { return (rows_.size() + batch_ - 1) / batch_; }

 private:
  std::vector<std::size_t> rows_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  std::mt19937_64& rng_;
};

class Trainer {
 public:
  Trainer(ModelSpec spec, const PreparedData& data, const TrainConfig& cfg, std::uint64_t seed)
      : spec_(std::move(spec)), data_(data), cfg_(cfg), rng_(seed), stream_(data.split.train, cfg.batch_size, rng_) {
    std::mt19937_64 init_rng(seed * 0x2545F4914F6CDD1Dull + 17);
    params = init_params(spec_, init_rng);
    adam = AdamState(params);
  }
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const ModelSpec& spec() const { return spec_; }

  /// Mean loss and gradient over `rows`; gradient accumulated into `grads`.
  double loss_grad(std::span<const std::size_t> rows, ParamSet& grads) const {
    const std::size_t threads = cfg_.deterministic ? 1 : std::max<std::size_t>(1, cfg_.threads);
    double total = 0.0;
    if (threads == 1 || rows.size() < 2 * threads) {
      total = chunk_loss_grad(rows, grads);
    } else {
      const std::size_t chunk = (rows.size() + threads - 1) / threads;
      std::vector<ParamSet> partial(threads, grads.zeros_like());
      std::vector<double> losses(threads, 0.0);
      {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
          const std::size_t lo = std::min(rows.size(), t * chunk), hi = std::min(rows.size(), lo + chunk);
          pool.emplace_back([&, t, lo, hi] { losses[t] = chunk_loss_grad(rows.subspan(lo, hi - lo), partial[t]); });
        }
      }
      for (std::size_t t = 0; t < threads; ++t) {
        total += losses[t];
        for (std::size_t b = 0; b < grads.blocks.size(); ++b)
          for (std::size_t i = 0; i < grads.blocks[b].values.size(); ++i)
            grads.blocks[b].values[i] += partial[t].blocks[b].values[i];
      }
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (auto& b : grads.blocks)
      for (auto& v : b.values) v *= inv;
    return total * inv;
  }

  double mean_loss(std::span<const std::size_t> rows) const {
    double total = 0.0;
    for (auto r : rows) total += softmax_cross_entropy(forward(spec_, params, data_.features[r]), data_.labels[r]).loss;
    return rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
  }

  int predict(std::size_t row) const {
    return static_cast<int>(argmax(forward(spec_, params, data_.features[row])));
  }

  Metrics evaluate(const std::vector<std::size_t>& rows, int positive) const {
    std::vector<int> truth, pred;
    for (auto r : rows) {
      truth.push_back(data_.labels[r]);
      pred.push_back(predict(r));
    }
    return confusion(truth, pred, positive);
  }

  /// One pass of minibatch Adam over the training split. With a prune state
  /// the ADMM penalty gradient is added; with masks, masked entries stay zero.
  double train_epoch(const PruneState* st = nullptr, const MaskSet* masks = nullptr) {
    ParamSet grads = params.zeros_like();
    double sum = 0.0;
    const std::size_t nb = stream_.batches_per_epoch();
    for (std::size_t b = 0; b < nb; ++b) {
      const auto rows = stream_.next();
      grads.set_zero();
      const double l = loss_grad(rows, grads);
      if (!std::isfinite(l)) return l;
      sum += l;
      if (st) add_penalty_gradient(*st, params, grads);
      step(grads, masks);
    }
    return sum / static_cast<double>(nb);
  }

  /// Penalised w-subproblem: `steps` minibatch Adam updates.
  void w_step(const PruneState& st, std::size_t steps) {
    admm_w_step(params, adam, st, steps, cfg_.lr, [&](const ParamSet&, ParamSet& g) {
      const auto rows = stream_.next();
      return loss_grad(rows, g);
    });
  }

  void step(ParamSet& grads, const MaskSet* masks) {
    if (masks)
      for (std::size_t b = 0; b < grads.blocks.size(); ++b)
        if (b < masks->size() && !(*masks)[b].empty())
          for (std::size_t i = 0; i < grads.blocks[b].values.size(); ++i)
            if (!(*masks)[b][i]) grads.blocks[b].values[i] = 0.0;
    adam_step(params, grads, adam, cfg_.lr);
    if (masks) apply_masks(params, *masks);
  }

  ParamSet params;
  AdamState adam;

 private:
  double chunk_loss_grad(std::span<const std::size_t> rows, ParamSet& grads) const {
    double total = 0.0;
    ForwardCache cache;
    for (auto r : rows) {
      const auto logits = forward(spec_, params, data_.features[r], &cache);
      const auto lg = softmax_cross_entropy(logits, data_.labels[r]);
      total += lg.loss;
      backward(spec_, params, cache, lg.grad, grads);
    }
    return total;
  }

  ModelSpec spec_;
  const PreparedData& data_;
  TrainConfig cfg_;
  std::mt19937_64 rng_;
  BatchStream stream_;
};

// ---- orchestration ------------------------------------------------------------------

struct TrainResult {
  RunReport report;
  ModelSpec spec;
  ParamSet params;
  MaskSet masks;
};

namespace detail {

inline std::vector<std::size_t> probe_rows(const Split& sp) {
  std::vector<std::size_t> rows = sp.train;
  if (rows.size() > 512) rows.resize(512);
  return rows;
}

inline void fill_layer_table(RunReport& rep, const ModelSpec& spec, const ParamSet& params, const MaskSet& masks,
                             const std::optional<PruneConfig>& prune) {
  rep.counts = count_params(spec);
  rep.layers.clear();
  rep.surviving_weights = 0;
  for (const auto& lc : rep.counts.layers) {
    LayerRow row{lc.layer, lc.label, lc.weights, lc.weights, 0};
    if (prune) row.budget = budget_for(lc.weights, prune->connection_rate);
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
      const auto& blk = params.blocks[b];
      if (blk.layer != lc.layer || blk.kind != BlockKind::Weight) continue;
      if (b < masks.size() && !masks[b].empty())
        row.surviving = static_cast<std::size_t>(std::count(masks[b].begin(), masks[b].end(), std::uint8_t{1}));
      else
        row.surviving = cardinality(blk.values);
    }
    rep.surviving_weights += row.surviving;
    rep.layers.push_back(row);
  }
}

/// Runs the training epochs, optional pruning and retraining on a prepared
/// Trainer; fills curves, trace, masks and final metrics.
inline void run_schedule(Trainer& tr, const PreparedData& data, const TaskSpec& task, const TrainConfig& cfg,
                         RunReport& rep, MaskSet& masks, std::size_t plain_epochs) {
  const auto& prune = cfg.prune;
  const auto probe = probe_rows(data.split);
  auto record = [&](std::size_t epoch, const char* phase, double loss) {
    EpochRecord e;
    e.epoch = epoch;
    e.phase = phase;
    e.loss = loss;
    if ((epoch + 1) % cfg.eval_every == 0) {
      e.train_accuracy = tr.evaluate(data.split.train, task.positive_label).accuracy();
      if (!data.split.test.empty()) e.test_accuracy = tr.evaluate(data.split.test, task.positive_label).accuracy();
    }
    e.nonzero_weights = tr.params.count_nonzero(BlockKind::Weight);
    rep.curves.push_back(e);
  };
  auto diverged = [&](double loss, const std::string& where) {
    if (std::isfinite(loss)) return false;
    rep.status = "diverged";
    rep.error = "non-finite loss during " + where;
    return true;
  };

  const bool admm = prune && prune->method == PruneMethod::Admm;
  const std::size_t admm_start = !admm ? plain_epochs
                                 : prune->admm_start_epoch < 0
                                     ? plain_epochs / 2
                                     : std::min<std::size_t>(static_cast<std::size_t>(prune->admm_start_epoch), plain_epochs);
  std::optional<PruneState> st;
  std::size_t admm_iter = 0;
  auto probe_loss = [&](const ParamSet&) { return tr.mean_loss(probe); };

  for (std::size_t epoch = 0; epoch < plain_epochs; ++epoch) {
    const bool active = admm && epoch >= admm_start;
    if (active && !st) st = init_prune_state(tr.spec(), tr.params, *prune);
    const double loss = tr.train_epoch(active ? &*st : nullptr);
    if (diverged(loss, "epoch " + std::to_string(epoch))) return;
    if (active) {
      for (Stage stage : {Stage::Conv, Stage::Fc}) {
        const bool any = std::any_of(st->layers.begin(), st->layers.end(), [&](const auto& l) { return l.stage == stage; });
        if (!any) continue;
        for (std::size_t c = 0; c < prune->admm_outer_iters; ++c) {
          try {
            tr.w_step(*st, prune->w_inner_steps);
          } catch (const std::runtime_error& e) {
            rep.status = "diverged";
            rep.error = e.what();
            return;
          }
          auto rec = admm_dual_cycle(*st, tr.params, stage, probe_loss, admm_iter++);
          double worst = 0.0;
          for (std::size_t k = 0; k < st->layers.size(); ++k)
            if (st->layers[k].stage == stage) worst = std::max(worst, rec.residuals[k]);
          rep.trace.records.push_back(std::move(rec));
          if (worst < prune->residual_tol) break;
        }
      }
    }
    record(epoch, active ? "admm" : "train", loss);
  }

  if (prune) {
    if (admm) {
      if (!st) st = init_prune_state(tr.spec(), tr.params, *prune);
      masks = hard_mask_and_freeze(tr.params, *st);
    } else {
      masks = magnitude_prune_baseline(tr.params, *prune);
    }
    tr.adam.reset();
    for (std::size_t e = 0; e < prune->retrain_epochs; ++e) {
      const double loss = tr.train_epoch(nullptr, &masks);
      if (diverged(loss, "retrain epoch " + std::to_string(e))) return;
      record(plain_epochs + e, "retrain", loss);
    }
  }
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace detail

inline ModelSpec model_for(const TaskSpec& task, std::size_t n, std::size_t classes, const TrainConfig& cfg) {
  auto spec = model_by_name(task.model, n, classes);
  if (cfg.unweighted_aggregation) std::get<Aggregate>(spec.layers.front()).unweighted = true;
  spec.validate();
  return spec;
}

/// Full pipeline on already-loaded spectra.
inline TrainResult run_training(const std::vector<Spectrum>& spectra, const TaskSpec& task, const TrainConfig& cfg,
                                const ParamSet* initial = nullptr, std::size_t plain_epochs_override = SIZE_MAX) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult out;
  out.spec = model_for(task, spectra.at(0).size(), std::max<std::size_t>(2, class_count_of(spectra)), cfg);
  const auto data = prepare_data(spectra, task, out.spec, cfg);
  const auto t1 = std::chrono::steady_clock::now();

  RunReport& rep = out.report;
  rep.task = task;
  rep.config = cfg;
  rep.model = out.spec.name;
  rep.seed = task.seed;
  rep.graph = data.graph;
  rep.timestamp = detail::utc_timestamp();

  Trainer tr(out.spec, data, cfg, task.seed);
  if (initial) {
    if (initial->blocks.size() != tr.params.blocks.size()) throw std::invalid_argument("initial parameters do not fit model");
    tr.params = *initial;
    tr.adam = AdamState(tr.params);
  }
  const std::size_t plain = plain_epochs_override == SIZE_MAX ? cfg.max_epochs : plain_epochs_override;
  detail::run_schedule(tr, data, task, cfg, rep, out.masks, plain);
  out.params = tr.params;
  if (!data.split.test.empty() && rep.status == "ok") rep.final_metrics = tr.evaluate(data.split.test, task.positive_label);
  detail::fill_layer_table(rep, out.spec, out.params, out.masks, cfg.prune);
  rep.seconds_prepare = std::chrono::duration<double>(t1 - t0).count();
  rep.seconds_train = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  return out;
}

inline TrainResult run_training(const TaskSpec& task, const TrainConfig& cfg) {
  return run_training(load_task_spectra(task), task, cfg);
}

// ---- sweeps -------------------------------------------------------------------------

struct NearFieldRow {
  double rate = 0.0;
  std::size_t K = 0;
  double accuracy = 0.0;
  std::size_t nnz = 0;
  std::size_t bytes = 0;
  double build_seconds = 0.0;
  std::string status = "ok";
};

/// One training run per rate with the same seed; rows ordered by rate, largest first.
inline std::vector<NearFieldRow> sweep_near_field_rate(const std::vector<Spectrum>& spectra, TaskSpec task,
                                                       const TrainConfig& cfg, std::vector<double> rates) {
  if (rates.size() < 2) throw std::invalid_argument("sweep_near_field_rate: need at least 2 rates");
  std::sort(rates.begin(), rates.end(), std::greater<>());
  std::vector<NearFieldRow> rows;
  for (double r : rates) {
    NearFieldRow row;
    row.rate = r;
    task.graph = WnfgConfig::with_rate(r);
    try {
      const auto res = run_training(spectra, task, cfg);
      row.K = res.report.graph.K;
      row.nnz = res.report.graph.nnz;
      row.bytes = res.report.graph.bytes;
      row.build_seconds = res.report.graph.build_seconds;
      row.accuracy = res.report.final_metrics.accuracy();
      row.status = res.report.status;
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

struct ConnectionRow {
  std::string method;
  double rate = 0.0;
  double accuracy = 0.0;
  std::size_t surviving_params = 0;
  std::string status = "ok";
};

inline const char* to_string(PruneMethod m) { return m == PruneMethod::Admm ? "admm" : "magnitude"; }

inline std::vector<ConnectionRow> sweep_connection_rate(const std::vector<Spectrum>& spectra, const TaskSpec& task,
                                                        TrainConfig cfg, const std::vector<double>& rates,
                                                        const std::vector<PruneMethod>& methods) {
  PruneConfig base = cfg.prune.value_or(PruneConfig{});
  std::vector<ConnectionRow> rows;
  for (auto m : methods)
    for (double r : rates) {
      ConnectionRow row;
      row.method = to_string(m);
      row.rate = r;
      try {
        PruneConfig pc = base;
        pc.method = m;
        pc.connection_rate = r;
        cfg.prune = pc;
        const auto res = run_training(spectra, task, cfg);
        row.accuracy = res.report.final_metrics.accuracy();
        row.surviving_params = res.report.surviving_weights;
        row.status = res.report.status;
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      rows.push_back(row);
    }
  return rows;
}

}  // namespace ssgc
