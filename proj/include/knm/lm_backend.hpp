#pragma once

#include <cstddef>
#include <span>

#include "knm/distribution.hpp"
#include "knm/tokenizer.hpp"

namespace knm {

/// Black-box next-token model. Everything downstream (datastore building,
/// retrieval, combination) talks to the model only through this surface.
///
/// Implementations must be deterministic in the context for fixed weights and
/// safe to call concurrently.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  /// Next-token distribution over the shared vocabulary. An empty context
  /// means start of sequence.
  virtual TokenDistribution predict(std::span<const TokenId> context) const = 0;

  /// Fixed-length representation of the context, dimension embedding_dim().
  virtual ContextEmbedding embed(std::span<const TokenId> context) const = 0;

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t embedding_dim() const = 0;
};

}  // namespace knm
