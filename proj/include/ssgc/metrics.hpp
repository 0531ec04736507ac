#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ssgc {

/// Binary confusion summary with one class designated positive (seizure).
struct Metrics {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
  double accuracy() const { return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0; }
  /// TP / (TP + FN); 0 when there are no positives.
  double sensitivity() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
  /// TN / (TN + FP); 0 when there are no negatives.
  double specificity() const { return tn + fp ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0; }
};

/// Multi-class predictions collapse to positive-vs-rest.
inline Metrics confusion(const std::vector<int>& truth, const std::vector<int>& predicted, int positive) {
  if (truth.empty()) throw std::invalid_argument("confusion: empty evaluation set");
  if (truth.size() != predicted.size()) throw std::invalid_argument("confusion: length mismatch");
  Metrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == positive, p = predicted[i] == positive;
    if (t && p) ++m.tp;
    else if (!t && !p) ++m.tn;
    else if (!t && p) ++m.fp;
    else ++m.fn;
  }
  return m;
}

}  // namespace ssgc
