#pragma once
// JSON run reports and CSV tables.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "train.hpp"

namespace ssgc {

inline nlohmann::json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy()}, {"specificity", m.specificity()}, {"sensitivity", m.sensitivity()},
          {"tp", m.tp}, {"tn", m.tn}, {"fp", m.fp}, {"fn", m.fn}};
}

inline nlohmann::json task_json(const TaskSpec& t) {
  nlohmann::json j = {{"dataset", t.dataset},     {"data_path", t.data_path},         {"classes", t.classes},
                      {"seg_len", t.seg_len},     {"overlap", t.overlap},             {"model", t.model},
                      {"seed", t.seed},           {"train_ratio", t.train_ratio},     {"positive_label", t.positive_label},
                      {"half_spectrum", t.half_spectrum}};
  if (t.graph.K) j["K"] = *t.graph.K;
  if (t.graph.near_field_rate) j["near_field_rate"] = *t.graph.near_field_rate;
  if (t.dataset == "synth") {
    j["synth_per_class"] = t.synth_per_class;
    j["synth_noise"] = t.synth_noise;
  }
  return j;
}

inline nlohmann::json config_json(const TrainConfig& c) {
  nlohmann::json j = {{"max_epochs", c.max_epochs},
                      {"batch_size", c.batch_size},
                      {"lr", c.lr},
                      {"deterministic", c.deterministic},
                      {"threads", c.threads},
                      {"feature_transform", to_string(c.feature_transform)},
                      {"unweighted_aggregation", c.unweighted_aggregation}};
  if (c.prune) {
    const auto& p = *c.prune;
    j["prune"] = {{"method", to_string(p.method)},
                  {"connection_rate", p.connection_rate},
                  {"rho", p.rho},
                  {"admm_outer_iters", p.admm_outer_iters},
                  {"w_inner_steps", p.w_inner_steps},
                  {"retrain_epochs", p.retrain_epochs},
                  {"admm_start_epoch", p.admm_start_epoch},
                  {"residual_tol", p.residual_tol},
                  {"include_bias", p.include_bias},
                  {"include_node_scale", p.include_node_scale}};
  }
  return j;
}

/// `files` maps artifact roles (checkpoint, trace, ...) to paths written next to the report.
inline nlohmann::json report_json(const RunReport& r, const nlohmann::json& files = nlohmann::json::object()) {
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& e : r.curves)
    curves.push_back({{"epoch", e.epoch},
                      {"phase", e.phase},
                      {"loss", e.loss},
                      {"train_accuracy", e.train_accuracy},
                      {"test_accuracy", e.test_accuracy},
                      {"nonzero_weights", e.nonzero_weights}});
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : r.layers)
    layers.push_back({{"layer", l.layer}, {"kind", l.label}, {"total", l.total}, {"budget", l.budget},
                      {"surviving", l.surviving}});
  return {{"tool_version", r.version},
          {"status", r.status},
          {"error", r.error},
          {"seed", r.seed},
          {"model", r.model},
          {"task", task_json(r.task)},
          {"config", config_json(r.config)},
          {"curves", curves},
          {"final_metrics", metrics_json(r.final_metrics)},
          {"parameters",
           {{"layers", layers},
            {"non_train", r.counts.non_train()},
            {"node_scale", r.counts.node_scale},
            {"total", r.counts.total()},
            {"surviving_weights", r.surviving_weights},
            {"surviving_total", r.surviving_total()}}},
          {"admm_trace_records", r.trace.records.size()},
          {"files", files},
          {"graph",
           {{"graphs", r.graph.graphs},
            {"n", r.graph.n},
            {"K", r.graph.K},
            {"nnz", r.graph.nnz},
            {"bytes", r.graph.bytes}}},
          // Everything that varies between otherwise identical runs lives here.
          {"wallclock",
           {{"timestamp", r.timestamp},
            {"graph_build_seconds", r.graph.build_seconds},
            {"prepare_seconds", r.seconds_prepare},
            {"train_seconds", r.seconds_train}}}};
}

/// Write via temp file + rename so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Human-readable summary of a report JSON document.
inline void print_report(std::ostream& os, const nlohmann::json& j) {
  os << "model        " << j.at("model").get<std::string>() << "  (status " << j.at("status").get<std::string>()
     << ", seed " << j.at("seed") << ")\n";
  const auto& t = j.at("task");
  os << "task         " << t.at("dataset").get<std::string>() << " seg_len=" << t.at("seg_len");
  if (t.contains("K")) os << " K=" << t.at("K");
  if (t.contains("near_field_rate")) os << " near_field_rate=" << t.at("near_field_rate");
  os << "\n";
  const auto& m = j.at("final_metrics");
  os << "metrics      acc=" << m.at("accuracy") << " spe=" << m.at("specificity") << " sen=" << m.at("sensitivity")
     << "  (TP " << m.at("tp") << ", TN " << m.at("tn") << ", FP " << m.at("fp") << ", FN " << m.at("fn") << ")\n";
  const auto& p = j.at("parameters");
  os << "layer  kind    total     budget    surviving\n";
  for (const auto& l : p.at("layers")) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-6zu %-7s %-9zu %-9zu %zu\n", l.at("layer").get<std::size_t>(),
                  l.at("kind").get<std::string>().c_str(), l.at("total").get<std::size_t>(),
                  l.at("budget").get<std::size_t>(), l.at("surviving").get<std::size_t>());
    os << buf;
  }
  os << "non-train    " << p.at("non_train") << "\n";
  os << "total        " << p.at("total") << "  surviving " << p.at("surviving_total") << "\n";
  const auto& g = j.at("graph");
  os << "graphs       " << g.at("graphs") << " x n=" << g.at("n") << ", nnz=" << g.at("nnz") << ", bytes=" << g.at("bytes")
     << "\n";
  const auto& curves = j.at("curves");
  if (!curves.empty()) {
    const auto& last = curves.back();
    os << "last epoch   " << last.at("epoch") << " (" << last.at("phase").get<std::string>() << ") loss=" << last.at("loss")
       << " test_acc=" << last.at("test_accuracy") << "\n";
  }
}

inline void write_near_field_csv(std::ostream& os, const std::vector<NearFieldRow>& rows) {
  os << "rate,K,accuracy,nnz,bytes,build_seconds,status\n";
  for (const auto& r : rows)
    os << r.rate << ',' << r.K << ',' << r.accuracy << ',' << r.nnz << ',' << r.bytes << ',' << r.build_seconds << ','
       << r.status << '\n';
}

inline void write_connection_csv(std::ostream& os, const std::vector<ConnectionRow>& rows) {
  os << "method,rate,accuracy,surviving_params,status\n";
  for (const auto& r : rows)
    os << r.method << ',' << r.rate << ',' << r.accuracy << ',' << r.surviving_params << ',' << r.status << '\n';
}

}  // namespace ssgc
