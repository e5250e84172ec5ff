#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "knm/distribution.hpp"
#include "knm/errors.hpp"
#include "knm/lm_backend.hpp"
#include "knm/retrieval.hpp"

namespace knm {

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// Outcome of replaying one context position: the model was right (E), wrong
/// (E_prime), or both model and retrieval were right and the position is left
/// out of the sample (Excluded).
enum class Event : std::uint8_t { E, E_prime, Excluded };

inline Event classify_observation(TokenId lm_argmax, std::optional<TokenId> retrieval_top1,
                                  TokenId actual) {
  if (lm_argmax != actual) return Event::E_prime;
  if (retrieval_top1 && *retrieval_top1 == actual) return Event::Excluded;
  return Event::E;
}

/// What to do with Excluded positions when filling the window.
enum class ExclusionRule : std::uint8_t {
  drop,        // skip them; the window reaches further back
  count_as_e,  // treat them as ordinary E observations
};

struct ObservationWindow {
  std::size_t window_size = 0;  // N
  std::vector<Event> events;    // context order, never Excluded
  std::size_t alpha = 0;        // number of E_prime in events

  std::size_t count() const { return events.size(); }
};

/// Builds the window from per-position events given in context order, taking
/// the most recent `window_size` usable observations.
inline ObservationWindow make_window(std::span<const Event> history, std::size_t window_size,
                                     ExclusionRule rule = ExclusionRule::drop) {
  ObservationWindow w;
  w.window_size = window_size;
  for (std::size_t i = history.size(); i > 0 && w.events.size() < window_size; --i) {
    Event ev = history[i - 1];
    if (ev == Event::Excluded) {
      if (rule == ExclusionRule::drop) continue;
      ev = Event::E;
    }
    w.events.push_back(ev);
    if (ev == Event::E_prime) ++w.alpha;
  }
  std::reverse(w.events.begin(), w.events.end());
  return w;
}

/// Beta(err * N, (1 - err) * N) prior on the probability that the model's
/// argmax is wrong.
struct BetaPrior {
  double a = 0.0;
  double b = 0.0;

  static BetaPrior from_error_rate(double err, std::size_t window_size) {
    const auto n = static_cast<double>(window_size);
    return {err * n, (1.0 - err) * n};
  }

  /// Expectation of Beta(a + alpha, b + n - alpha).
  double posterior_mean(std::size_t alpha, std::size_t n) const {
    return (a + static_cast<double>(alpha)) / (a + b + static_cast<double>(n));
  }
};

/// Posterior-mean interpolation weight (err*N + alpha) / (N + n). With a full
/// window this is (alpha/N + err) / 2; with no observations it is err.
inline double compute_lambda(const ObservationWindow& window, double err) {
  if (!(err >= 0.0 && err <= 1.0)) throw ConfigError("error rate must lie in [0, 1]");
  if (window.window_size == 0) return err;
  const double lambda = BetaPrior::from_error_rate(err, window.window_size)
                            .posterior_mean(window.alpha, window.count());
  return std::clamp(lambda, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

/// lambda * p_knm + (1 - lambda) * p_lm. A missing retrieval distribution
/// (empty datastore) leaves p_lm untouched.
inline TokenDistribution interpolate(const TokenDistribution& p_lm,
                                     const std::optional<TokenDistribution>& p_knm,
                                     double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (!p_knm) return p_lm;
  if (p_knm->size() != p_lm.size()) {
    throw VocabMismatch("cannot interpolate distributions of sizes " +
                        std::to_string(p_lm.size()) + " and " + std::to_string(p_knm->size()));
  }
  std::vector<double> p(p_lm.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    p[i] = lambda * (*p_knm)[id] + (1.0 - lambda) * p_lm[id];
  }
  return TokenDistribution(std::move(p));
}

// ---------------------------------------------------------------------------
// Modes
// ---------------------------------------------------------------------------

enum class CombineMode : std::uint8_t {
  knm_bayesian,      // decoupled store, posterior lambda
  knm_fixed_lambda,  // decoupled store, fixed lambda (ablation)
  knm_prior_only,    // decoupled store, lambda = err (ablation)
  knn_lm_baseline,   // full store, fixed lambda
  lm_only,           // no retrieval
};

inline constexpr std::array<CombineMode, 5> kAllModes = {
    CombineMode::lm_only, CombineMode::knn_lm_baseline, CombineMode::knm_fixed_lambda,
    CombineMode::knm_prior_only, CombineMode::knm_bayesian};

inline std::string_view to_string(CombineMode m) {
  switch (m) {
    case CombineMode::knm_bayesian: return "knm_bayesian";
    case CombineMode::knm_fixed_lambda: return "knm_fixed_lambda";
    case CombineMode::knm_prior_only: return "knm_prior_only";
    case CombineMode::knn_lm_baseline: return "knn_lm_baseline";
    case CombineMode::lm_only: return "lm_only";
  }
  return "lm_only";
}

inline CombineMode parse_combine_mode(std::string_view s) {
  for (auto m : kAllModes) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

/// Modes whose retrieval side reads the full (every-position) store.
inline bool uses_full_store(CombineMode m) { return m == CombineMode::knn_lm_baseline; }
inline bool uses_retrieval(CombineMode m) { return m != CombineMode::lm_only; }

struct CombinerConfig {
  CombineMode mode = CombineMode::knm_bayesian;
  std::size_t k = 8;
  std::size_t window = 8;     // N
  double fixed_lambda = 0.1;  // knm_fixed_lambda and knn_lm_baseline only
  ExclusionRule exclusion = ExclusionRule::drop;

  void validate() const {
    if (k == 0) throw ConfigError("k must be >= 1");
    if (!(fixed_lambda >= 0.0 && fixed_lambda <= 1.0)) {
      throw ConfigError("fixed_lambda must lie in [0, 1]");
    }
  }
};

/// Interpolation weight for a mode. `window` is only read in bayesian mode.
inline double lambda_for_mode(const CombinerConfig& config, const ObservationWindow& window,
                              double err) {
  switch (config.mode) {
    case CombineMode::knm_bayesian: return compute_lambda(window, err);
    case CombineMode::knm_fixed_lambda:
    case CombineMode::knn_lm_baseline: return config.fixed_lambda;
    case CombineMode::knm_prior_only: return err;
    case CombineMode::lm_only: return 0.0;
  }
  return 0.0;
}

struct Completion {
  TokenId token = 0;
  TokenDistribution distribution;
  double lambda = 0.0;
};

/// Retrieval-augmented next-token completion over a black-box model.
///
/// The index must be built over the store matching the mode: the decoupled
/// store for the knm_* modes, the full store for knn_lm_baseline. The store's
/// error rate supplies the prior.
class Completer {
 public:
  Completer(const LanguageModel& lm, const FlatIndex& index, CombinerConfig config)
      : lm_(&lm), index_(&index), config_(config) {
    config_.validate();
    if (index.dim() != lm.embedding_dim()) {
      throw DimensionMismatch("index dimension " + std::to_string(index.dim()) +
                              " != model embedding dimension " +
                              std::to_string(lm.embedding_dim()));
    }
  }

  const CombinerConfig& config() const { return config_; }

  /// Replays the context position by position (each position predicted from
  /// its own prefix) back to the most recent N usable observations.
  ObservationWindow observe(std::span<const TokenId> context) const {
    std::vector<Event> reversed;
    std::size_t usable = 0;
    for (std::size_t i = context.size(); i > 0 && usable < config_.window; --i) {
      const auto prefix = context.first(i - 1);
      const Event ev = classify_observation(lm_->predict(prefix).argmax(),
                                            index_->search(lm_->embed(prefix), config_.k).top1(),
                                            context[i - 1]);
      reversed.push_back(ev);
      if (ev != Event::Excluded || config_.exclusion == ExclusionRule::count_as_e) ++usable;
    }
    std::vector<Event> history(reversed.rbegin(), reversed.rend());
    return make_window(history, config_.window, config_.exclusion);
  }

  double lambda(std::span<const TokenId> context) const {
    const double err = index_->store().err();
    if (config_.mode != CombineMode::knm_bayesian) return lambda_for_mode(config_, {}, err);
    return lambda_for_mode(config_, observe(context), err);
  }

  Completion complete_token(std::span<const TokenId> context) const {
    return step(context, lambda(context));
  }

  /// Greedy line completion up to END-OF-LINE or max_tokens. The window is
  /// taken from the given context only; generated tokens extend the context
  /// but add no observations, so lambda stays fixed while decoding.
  TokenSequence complete_line(std::span<const TokenId> context, std::size_t max_tokens) const {
    return complete_line_with_lambda(context, lambda(context), max_tokens);
  }

  TokenSequence complete_line_with_lambda(std::span<const TokenId> context, double lam,
                                          std::size_t max_tokens) const {
    if (max_tokens == 0) throw ConfigError("max_tokens must be >= 1");
    TokenSequence ctx(context.begin(), context.end());
    TokenSequence out;
    while (out.size() < max_tokens) {
      const auto c = step(ctx, lam);
      out.push_back(c.token);
      ctx.push_back(c.token);
      if (c.token == kEolId) break;
    }
    return out;
  }

  /// One combination step with a given lambda.
  Completion step(std::span<const TokenId> context, double lam) const {
    auto p_lm = lm_->predict(context);
    Completion c;
    c.lambda = lam;
    if (config_.mode == CombineMode::lm_only) {
      c.distribution = std::move(p_lm);
    } else {
      const auto neighbors = index_->search(lm_->embed(context), config_.k);
      c.distribution = interpolate(p_lm, knm_distribution(neighbors, lm_->vocab_size()), lam);
    }
    c.token = c.distribution.argmax();
    return c;
  }

 private:
  const LanguageModel* lm_;
  const FlatIndex* index_;
  CombinerConfig config_;
};

inline Completion complete_token(std::span<const TokenId> context, const LanguageModel& lm,
                                 const FlatIndex& index, const CombinerConfig& config) {
  return Completer(lm, index, config).complete_token(context);
}

inline TokenSequence complete_line(std::span<const TokenId> context, const LanguageModel& lm,
                                   const FlatIndex& index, const CombinerConfig& config,
                                   std::size_t max_tokens) {
  return Completer(lm, index, config).complete_line(context, max_tokens);
}

}  // namespace knm
