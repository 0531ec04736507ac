#pragma once
// Labelled spectrum corpora: synthetic generator, Bonn directory layout, CSV,
// stratified splitting and feature scaling.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "signal.hpp"

namespace ssgc {

struct SyntheticConfig {
  std::size_t n = 256;
  std::size_t per_class = 200;
  double noise = 0.5;
  std::uint64_t seed = 1;
};

/// Two classes of noisy tones: class 0 draws its frequency bin from [4,12],
/// class 1 from [20,36]. Every segment also carries a distractor tone in
/// [48,64] shared by both classes. Bands do not overlap, so the classes are
/// separable in the magnitude spectrum.
inline std::vector<Spectrum> make_synthetic_spectra(const SyntheticConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> amp(0.5, 1.5), phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, cfg.noise);
  const std::size_t bands[2][2] = {{4, 12}, {20, 36}};
  const std::size_t distractor[2] = {48, 64};
  std::vector<Spectrum> out;
  out.reserve(2 * cfg.per_class);
  for (std::size_t k = 0; k < cfg.per_class; ++k)
    for (int label = 0; label < 2; ++label) {
      const auto hi = std::min(bands[label][1], cfg.n / 2 - 1);
      std::uniform_int_distribution<std::size_t> bin(std::min(bands[label][0], hi), hi);
      std::uniform_int_distribution<std::size_t> dbin(std::min(distractor[0], cfg.n / 2 - 1),
                                                      std::min(distractor[1], cfg.n / 2 - 1));
      const double f = static_cast<double>(bin(rng)), fd = static_cast<double>(dbin(rng));
      const double a = amp(rng), ph = phase(rng), ad = amp(rng), phd = phase(rng);
      Segment seg;
      seg.label = label;
      seg.source_id = "synth";
      seg.offset = out.size();
      seg.samples.resize(cfg.n);
      for (std::size_t t = 0; t < cfg.n; ++t) {
        const double tt = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(cfg.n);
        seg.samples[t] = a * std::sin(f * tt + ph) + 0.5 * ad * std::sin(fd * tt + phd) + noise(rng);
      }
      out.push_back(to_spectrum(seg));
    }
  return out;
}

namespace detail {

// Bonn subsets are distributed either as A..E or with the original folder
// letters Z, O, N, F, S.
inline std::filesystem::path find_bonn_set(const std::filesystem::path& root, const std::string& set) {
  static const std::map<std::string, std::string> alias = {
      {"A", "Z"}, {"B", "O"}, {"C", "N"}, {"D", "F"}, {"E", "S"}};
  std::vector<std::string> names = {set};
  if (auto it = alias.find(set); it != alias.end()) names.push_back(it->second);
  for (const auto& nm : names)
    for (const auto& cand : {nm, std::string(1, static_cast<char>(std::tolower(nm[0])))}) {
      const auto p = root / cand;
      if (std::filesystem::is_directory(p)) return p;
    }
  throw std::runtime_error("dataset missing: no directory for Bonn subset '" + set + "' under " + root.string());
}

}  // namespace detail

/// Loads the listed Bonn subsets (label = position in `sets`) and converts
/// every record into non-overlapping segments and their spectra.
inline std::vector<Spectrum> load_bonn_spectra(const std::filesystem::path& root, const std::vector<std::string>& sets,
                                               std::size_t seg_len, std::size_t overlap = 0,
                                               bool half_spectrum = false) {
  std::vector<Spectrum> out;
  for (std::size_t label = 0; label < sets.size(); ++label) {
    const auto dir = detail::find_bonn_set(root, sets[label]);
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("dataset missing: " + dir.string() + " has no files");
    for (const auto& f : files) {
      const auto rec = load_bonn_record(f, static_cast<int>(label));
      for (const auto& s : segment(rec, seg_len, overlap)) out.push_back(to_spectrum(s, half_spectrum));
    }
  }
  return out;
}

inline std::vector<Spectrum> load_csv_spectra(const std::filesystem::path& path, std::size_t seg_len,
                                              std::size_t overlap, double sample_rate, bool half_spectrum = false) {
  std::vector<Spectrum> out;
  for (const auto& rec : load_csv_records(path, 0, sample_rate))
    for (const auto& s : segment(rec, seg_len, overlap)) out.push_back(to_spectrum(s, half_spectrum));
  return out;
}

struct Split {
  std::vector<std::size_t> train, test;
};

/// Per-class shuffle, then the first round(ratio * class_count) go to train.
inline Split stratified_split(const std::vector<int>& labels, double train_ratio, std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw std::invalid_argument("train_ratio must be in (0,1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  Split sp;
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto ntrain = static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(idx.size())));
    sp.train.insert(sp.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(ntrain));
    sp.test.insert(sp.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(ntrain), idx.end());
  }
  std::sort(sp.train.begin(), sp.train.end());
  std::sort(sp.test.begin(), sp.test.end());
  return sp;
}

enum class FeatureTransform { None, Standardize, LogStandardize };

inline FeatureTransform parse_feature_transform(const std::string& s) {
  if (s == "none") return FeatureTransform::None;
  if (s == "standardize") return FeatureTransform::Standardize;
  if (s == "log-standardize") return FeatureTransform::LogStandardize;
  throw std::invalid_argument("feature_transform must be none, standardize or log-standardize");
}

inline const char* to_string(FeatureTransform t) {
  switch (t) {
    case FeatureTransform::None: return "none";
    case FeatureTransform::Standardize: return "standardize";
    case FeatureTransform::LogStandardize: return "log-standardize";
  }
  return "?";
}

/// Per-node affine normalisation fitted on training features, optionally
/// after a signed log1p compression.
struct FeatureScaler {
  FeatureTransform kind = FeatureTransform::LogStandardize;
  std::vector<double> mean, inv_std;

  static double compress(double v) { return std::copysign(std::log1p(std::abs(v)), v); }

  void fit(const std::vector<std::vector<double>>& feats, const std::vector<std::size_t>& rows) {
    if (kind == FeatureTransform::None || rows.empty()) return;
    const std::size_t d = feats[rows.front()].size();
    mean.assign(d, 0.0);
    inv_std.assign(d, 0.0);
    std::vector<double> sq(d, 0.0);
    for (auto r : rows)
      for (std::size_t j = 0; j < d; ++j) {
        const double v = kind == FeatureTransform::LogStandardize ? compress(feats[r][j]) : feats[r][j];
        mean[j] += v;
        sq[j] += v * v;
      }
    const double n = static_cast<double>(rows.size());
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] /= n;
      const double var = std::max(0.0, sq[j] / n - mean[j] * mean[j]);
      inv_std[j] = 1.0 / std::max(std::sqrt(var), 1e-8);
    }
  }

  std::vector<double> apply(std::vector<double> v) const {
    if (kind == FeatureTransform::None) return v;
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double x = kind == FeatureTransform::LogStandardize ? compress(v[j]) : v[j];
      v[j] = (x - mean[j]) * inv_std[j];
    }
    return v;
  }
};

// ---- spectrum cache ------------------------------------------------------------
// One spectrum per row: source_id,offset,label,m_0,...,m_{n-1}. Source ids must
// not contain commas.

inline void write_spectra_csv(std::ostream& os, const std::vector<Spectrum>& spectra) {
  os << "source_id,offset,label,magnitudes...\n";
  os.precision(17);
  for (const auto& s : spectra) {
    os << s.source_id << ',' << s.offset << ',' << s.label;
    for (double m : s.magnitudes) os << ',' << m;
    os << '\n';
  }
}

inline std::vector<Spectrum> read_spectra_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::vector<Spectrum> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || detail::trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    Spectrum s;
    std::size_t col = 0;
    while (std::getline(ss, tok, ',')) {
      double v = 0.0;
      if (col == 0) {
        s.source_id = tok;
      } else if (!detail::parse_double(detail::trim(tok), v)) {
        throw ParseError(path.string(), lineno, "malformed field " + std::to_string(col + 1));
      } else if (col == 1) {
        s.offset = static_cast<std::size_t>(v);
      } else if (col == 2) {
        s.label = static_cast<int>(v);
      } else {
        s.magnitudes.push_back(v);
      }
      ++col;
    }
    if (s.magnitudes.size() < 2) throw ParseError(path.string(), lineno, "row has fewer than 2 magnitudes");
    if (!out.empty() && out.front().size() != s.size())
      throw ParseError(path.string(), lineno, "spectrum length differs from first row");
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ParseError(path.string(), 0, "empty file");
  return out;
}

}  // namespace ssgc
