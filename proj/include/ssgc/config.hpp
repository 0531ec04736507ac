#pragma once
// Flat `key = value` configuration files.
//
//   # comment
//   model = ssgcnet
//   near_field_rate = 0.1
//   prune.connection_rate = 0.1
//
// Unknown keys, duplicate keys and malformed values are errors that name the key.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "train.hpp"

namespace ssgc {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, std::size_t line, const std::string& what)
      : std::runtime_error("config key '" + key + "'" + (line ? " (line " + std::to_string(line) + ")" : "") + ": " +
                           what),
        key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  TaskSpec task;
  TrainConfig train;
};

namespace detail {

inline std::size_t to_size(const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected a non-negative integer");
  return out;
}

inline long to_long(const std::string& v) {
  long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected an integer");
  return out;
}

inline double to_real(const std::string& v) {
  double out = 0.0;
  if (!parse_double(v, out)) throw std::invalid_argument("expected a number");
  return out;
}

inline bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected true or false");
}

inline std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = std::string(trim(tok));
    if (tok.empty()) throw std::invalid_argument("empty list element");
    out.push_back(tok);
  }
  if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
  return out;
}

inline PruneConfig& prune_of(RunConfig& c) {
  if (!c.train.prune) c.train.prune = PruneConfig{};
  return *c.train.prune;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset", [](RunConfig& c, const std::string& v) { c.task.dataset = v; }},
      {"data_path", [](RunConfig& c, const std::string& v) { c.task.data_path = v; }},
      {"classes", [](RunConfig& c, const std::string& v) { c.task.classes = to_list(v); }},
      {"seg_len", [](RunConfig& c, const std::string& v) { c.task.seg_len = to_size(v); }},
      {"overlap", [](RunConfig& c, const std::string& v) { c.task.overlap = to_size(v); }},
      {"K", [](RunConfig& c, const std::string& v) { c.task.graph = WnfgConfig::with_K(to_size(v)); }},
      {"near_field_rate",
       [](RunConfig& c, const std::string& v) { c.task.graph = WnfgConfig::with_rate(to_real(v)); }},
      {"model", [](RunConfig& c, const std::string& v) { c.task.model = v; }},
      {"seed", [](RunConfig& c, const std::string& v) { c.task.seed = to_size(v); }},
      {"train_ratio", [](RunConfig& c, const std::string& v) { c.task.train_ratio = to_real(v); }},
      {"positive_label",
       [](RunConfig& c, const std::string& v) { c.task.positive_label = static_cast<int>(to_long(v)); }},
      {"half_spectrum", [](RunConfig& c, const std::string& v) { c.task.half_spectrum = to_bool(v); }},
      {"synth_per_class", [](RunConfig& c, const std::string& v) { c.task.synth_per_class = to_size(v); }},
      {"synth_noise", [](RunConfig& c, const std::string& v) { c.task.synth_noise = to_real(v); }},
      {"sample_rate", [](RunConfig& c, const std::string& v) { c.task.sample_rate = to_real(v); }},
      {"max_epochs", [](RunConfig& c, const std::string& v) { c.train.max_epochs = to_size(v); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = to_size(v); }},
      {"lr", [](RunConfig& c, const std::string& v) { c.train.lr = to_real(v); }},
      {"eval_every", [](RunConfig& c, const std::string& v) { c.train.eval_every = to_size(v); }},
      {"deterministic", [](RunConfig& c, const std::string& v) { c.train.deterministic = to_bool(v); }},
      {"threads", [](RunConfig& c, const std::string& v) { c.train.threads = to_size(v); }},
      {"feature_transform",
       [](RunConfig& c, const std::string& v) { c.train.feature_transform = parse_feature_transform(v); }},
      {"unweighted_aggregation",
       [](RunConfig& c, const std::string& v) { c.train.unweighted_aggregation = to_bool(v); }},
      {"prune",
       [](RunConfig& c, const std::string& v) {
         if (to_bool(v))
           prune_of(c);
         else
           c.train.prune.reset();
       }},
      {"prune.method",
       [](RunConfig& c, const std::string& v) {
         if (v == "admm")
           prune_of(c).method = PruneMethod::Admm;
         else if (v == "magnitude")
           prune_of(c).method = PruneMethod::Magnitude;
         else
           throw std::invalid_argument("expected admm or magnitude");
       }},
      {"prune.connection_rate", [](RunConfig& c, const std::string& v) { prune_of(c).connection_rate = to_real(v); }},
      {"prune.rho", [](RunConfig& c, const std::string& v) { prune_of(c).rho = to_real(v); }},
      {"prune.admm_outer_iters", [](RunConfig& c, const std::string& v) { prune_of(c).admm_outer_iters = to_size(v); }},
      {"prune.w_inner_steps", [](RunConfig& c, const std::string& v) { prune_of(c).w_inner_steps = to_size(v); }},
      {"prune.retrain_epochs", [](RunConfig& c, const std::string& v) { prune_of(c).retrain_epochs = to_size(v); }},
      {"prune.admm_start_epoch", [](RunConfig& c, const std::string& v) { prune_of(c).admm_start_epoch = to_long(v); }},
      {"prune.residual_tol", [](RunConfig& c, const std::string& v) { prune_of(c).residual_tol = to_real(v); }},
      {"prune.include_bias", [](RunConfig& c, const std::string& v) { prune_of(c).include_bias = to_bool(v); }},
      {"prune.include_node_scale",
       [](RunConfig& c, const std::string& v) { prune_of(c).include_node_scale = to_bool(v); }},
  };
  return table;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::config_setters()) keys.push_back(k);
  return keys;
}

/// Applies one key on top of `cfg`.
inline void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value, std::size_t line = 0) {
  const auto& table = detail::config_setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, line, "unknown key");
  try {
    it->second(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, line, std::string(e.what()) + " (got '" + value + "')");
  }
}

inline void apply_config_stream(RunConfig& cfg, std::istream& in) {
  std::set<std::string> seen;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line(detail::trim(raw));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, lineno, "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("", lineno, "missing key");
    if (!seen.insert(key).second) throw ConfigError(key, lineno, "duplicate key");
    apply_config_value(cfg, key, value, lineno);
  }
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  apply_config_stream(cfg, in);
}

}  // namespace ssgc
