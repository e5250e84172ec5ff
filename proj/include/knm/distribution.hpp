#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "knm/errors.hpp"
#include "knm/tokenizer.hpp"

namespace knm {

inline constexpr double kDistributionTolerance = 1e-9;

/// Probability vector over the whole vocabulary.
class TokenDistribution {
 public:
  TokenDistribution() = default;
  explicit TokenDistribution(std::vector<double> probs) : probs_(std::move(probs)) {}

  static TokenDistribution uniform(std::size_t vocab_size) {
    return TokenDistribution(std::vector<double>(vocab_size, 1.0 / static_cast<double>(vocab_size)));
  }

  /// Max-shifted softmax.
  static TokenDistribution softmax(std::span<const double> logits) {
    if (logits.empty()) return {};
    const double hi = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      p[i] = std::exp(logits[i] - hi);
      z += p[i];
    }
    for (auto& v : p) v /= z;
    return TokenDistribution(std::move(p));
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](TokenId id) const { return probs_[id]; }
  double& operator[](TokenId id) { return probs_[id]; }
  std::span<const double> probs() const { return probs_; }
  std::vector<double>& mutable_probs() { return probs_; }

  /// Highest-probability token; ties go to the lowest id.
  TokenId argmax() const {
    TokenId best = 0;
    for (std::size_t i = 1; i < probs_.size(); ++i) {
      if (probs_[i] > probs_[best]) best = static_cast<TokenId>(i);
    }
    return best;
  }

  double sum() const {
    double s = 0.0;
    for (double v : probs_) s += v;
    return s;
  }

  bool is_valid(double tol = kDistributionTolerance) const {
    if (probs_.empty()) return false;
    for (double v : probs_) {
      if (!(v >= 0.0) || v > 1.0 + tol) return false;
    }
    return std::abs(sum() - 1.0) <= tol;
  }

  friend bool operator==(const TokenDistribution&, const TokenDistribution&) = default;

 private:
  std::vector<double> probs_;
};

/// Fixed-dimension context vector, stored in single precision.
struct ContextEmbedding {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  bool is_finite() const {
    return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
  }
  friend bool operator==(const ContextEmbedding&, const ContextEmbedding&) = default;
};

}  // namespace knm
