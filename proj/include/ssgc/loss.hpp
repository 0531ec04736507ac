#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace ssgc {

/// Max-shifted softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - mx);
  for (auto& v : p) v /= sum;
  return p;
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // softmax - one_hot(label)
};

inline LossGrad softmax_cross_entropy(std::span<const double> logits, int label) {
  if (logits.size() < 2) throw std::invalid_argument("softmax_cross_entropy: need at least 2 classes");
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw std::invalid_argument("softmax_cross_entropy: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double log_z = mx + std::log(sum);
  LossGrad out;
  out.loss = log_z - logits[static_cast<std::size_t>(label)];
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - log_z);
  out.grad[static_cast<std::size_t>(label)] -= 1.0;
  return out;
}

inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace ssgc
