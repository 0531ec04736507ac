#pragma once
// Time-series records, fixed-length segmentation and magnitude spectra.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssgc {

inline constexpr double kBonnSampleRate = 173.61;

/// Error raised while parsing an input file; carries the 1-based line number
/// (0 when the problem is not tied to one line).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + (line ? ":" + std::to_string(line) : std::string()) +
                           ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct RawRecord {
  std::vector<double> samples;
  double sample_rate = kBonnSampleRate;
  int label = 0;
  std::string source_id;
};

struct Segment {
  std::vector<double> samples;
  int label = 0;
  std::string source_id;
  std::size_t offset = 0;
};

struct Spectrum {
  std::vector<double> magnitudes;
  int label = 0;
  std::string source_id;
  std::size_t offset = 0;

  std::size_t size() const noexcept { return magnitudes.size(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Strict decimal parse: the whole token must be consumed.
inline bool parse_double(const std::string& token, double& out) {
  if (token.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(token, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == token.size() && std::isfinite(out);
}

}  // namespace detail

/// Bonn ASCII format: one decimal value per line, blank lines ignored.
inline RawRecord load_bonn_record(const std::filesystem::path& path, int label,
                                  double sample_rate = kBonnSampleRate) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  RawRecord rec;
  rec.label = label;
  rec.sample_rate = sample_rate;
  rec.source_id = path.filename().string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    double v = 0.0;
    if (!detail::parse_double(t, v))
      throw ParseError(path.string(), lineno, "malformed value '" + t + "'");
    rec.samples.push_back(v);
  }
  if (rec.samples.empty()) throw ParseError(path.string(), 0, "empty file");
  return rec;
}

/// Generic CSV: each row is `value` or `value,label`. Rows are grouped into one
/// record per contiguous run of equal labels; rows without a label use
/// `default_label`. A non-numeric first row is treated as a header.
inline std::vector<RawRecord> load_csv_records(const std::filesystem::path& path,
                                               int default_label, double sample_rate) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::vector<RawRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    const std::string vtok = detail::trim(t.substr(0, comma));
    double v = 0.0;
    if (!detail::parse_double(vtok, v)) {
      if (first_row) {
        first_row = false;
        continue;
      }
      throw ParseError(path.string(), lineno, "malformed value '" + vtok + "'");
    }
    first_row = false;
    int label = default_label;
    if (comma != std::string::npos) {
      const std::string ltok = detail::trim(t.substr(comma + 1));
      double lv = 0.0;
      if (!detail::parse_double(ltok, lv) || lv != std::floor(lv) || lv < 0)
        throw ParseError(path.string(), lineno, "malformed label '" + ltok + "'");
      label = static_cast<int>(lv);
    }
    if (out.empty() || out.back().label != label) {
      RawRecord rec;
      rec.label = label;
      rec.sample_rate = sample_rate;
      rec.source_id = path.filename().string() + "#" + std::to_string(out.size());
      out.push_back(std::move(rec));
    }
    out.back().samples.push_back(v);
  }
  if (out.empty()) throw ParseError(path.string(), 0, "empty file");
  return out;
}

/// Cuts a record into windows of `seg_len` at stride `seg_len - overlap`.
/// The trailing partial window is dropped. Returns an empty list (with a
/// warning on `warn`) when the record is shorter than one window.
inline std::vector<Segment> segment(const RawRecord& record, std::size_t seg_len,
                                    std::size_t overlap = 0, std::ostream* warn = &std::cerr) {
  if (seg_len < 2) throw std::invalid_argument("segment: seg_len must be >= 2");
  if (overlap >= seg_len) throw std::invalid_argument("segment: overlap must be < seg_len");
  std::vector<Segment> out;
  const std::size_t n = record.samples.size();
  if (seg_len > n) {
    if (warn)
      *warn << "warning: record '" << record.source_id << "' has " << n
            << " samples, shorter than segment length " << seg_len << "\n";
    return out;
  }
  const std::size_t stride = seg_len - overlap;
  for (std::size_t off = 0; off + seg_len <= n; off += stride) {
    Segment s;
    s.samples.assign(record.samples.begin() + static_cast<std::ptrdiff_t>(off),
                     record.samples.begin() + static_cast<std::ptrdiff_t>(off + seg_len));
    s.label = record.label;
    s.source_id = record.source_id;
    s.offset = off;
    out.push_back(std::move(s));
  }
  return out;
}

namespace detail {

inline bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

// In-place iterative radix-2 FFT, forward sign.
inline void fft_pow2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<std::complex<double>> tw(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      tw[k] = {std::cos(ang), std::sin(ang)};
    }
    for (std::size_t i = 0; i < n; i += len)
      for (std::size_t k = 0; k < half; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
  }
}

// O(n^2) DFT with exact (i*m mod n) twiddle indexing.
inline std::vector<std::complex<double>> dft_direct(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> tw(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    tw[k] = {std::cos(ang), std::sin(ang)};
  }
  std::vector<std::complex<double>> out(n);
  for (std::size_t m = 0; m < n; ++m) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * tw[(i * m) % n];
    out[m] = acc;
  }
  return out;
}

}  // namespace detail

/// |DFT| of a real sequence, 0-based bins. Power-of-two lengths use an FFT.
inline std::vector<double> dft_magnitudes(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> c;
  if (detail::is_pow2(n)) {
    c.assign(x.begin(), x.end());
    detail::fft_pow2(c);
  } else {
    c = detail::dft_direct(x);
  }
  std::vector<double> mag(n);
  for (std::size_t m = 0; m < n; ++m) mag[m] = std::abs(c[m]);
  return mag;
}

/// Frequency-magnitude spectrum of a segment. With `half_spectrum` only the
/// first n/2 bins are kept.
inline Spectrum to_spectrum(const Segment& seg, bool half_spectrum = false) {
  if (seg.samples.size() < 2) throw std::invalid_argument("to_spectrum: segment length must be >= 2");
  Spectrum s;
  s.magnitudes = dft_magnitudes(seg.samples);
  if (half_spectrum) s.magnitudes.resize(seg.samples.size() / 2);
  s.label = seg.label;
  s.source_id = seg.source_id;
  s.offset = seg.offset;
  return s;
}

}  // namespace ssgc
