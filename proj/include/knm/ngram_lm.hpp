#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "knm/binary_io.hpp"
#include "knm/distribution.hpp"
#include "knm/errors.hpp"
#include "knm/lm_backend.hpp"

namespace knm {

struct NgramOptions {
  int order = 3;             // 1, 2 or 3
  double smoothing_k = 1.0;  // add-k constant, > 0
  std::size_t dim = 64;      // embedding dimension
  std::size_t window = 8;    // tokens feeding the embedding
  double decay = 0.7;        // per-position weight decay in the embedding
  std::uint64_t seed = 0;    // seeds the hashed projection
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Pseudo-random projection weight in [-1, 1) for (token, distance, coordinate).
inline double projection_weight(std::uint64_t seed, TokenId token, std::size_t distance,
                                std::size_t coord) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ token);
  h = splitmix64(h ^ (static_cast<std::uint64_t>(distance) << 32 | coord));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace detail

/// Add-k smoothed n-gram model with backoff to shorter contexts when the
/// full context was never seen in training, plus a hashed-projection context
/// embedding. Read-only after training.
class NgramLanguageModel final : public LanguageModel {
 public:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> next;
    friend bool operator==(const ContextCounts&, const ContextCounts&) = default;
  };
  using CountTable = std::map<std::vector<TokenId>, ContextCounts>;

  /// Untrained model: every prediction is uniform.
  NgramLanguageModel(std::size_t vocab_size, NgramOptions options)
      : options_(options), vocab_size_(vocab_size) {
    validate();
    tables_.resize(static_cast<std::size_t>(options_.order));
  }

  static NgramLanguageModel train(std::span<const TokenSequence> corpus, std::size_t vocab_size,
                                  NgramOptions options) {
    if (corpus.empty()) throw EmptyCorpus("cannot train a language model on an empty corpus");
    NgramLanguageModel lm(vocab_size, options);
    const auto order = static_cast<std::size_t>(options.order);
    for (const auto& seq : corpus) {
      for (std::size_t t = 0; t < seq.size(); ++t) {
        if (seq[t] >= vocab_size) {
          throw DataError("token id " + std::to_string(seq[t]) + " outside vocabulary of size " +
                          std::to_string(vocab_size));
        }
        for (std::size_t j = 0; j < order && j <= t; ++j) {
          std::vector<TokenId> ctx(seq.begin() + static_cast<std::ptrdiff_t>(t - j),
                                   seq.begin() + static_cast<std::ptrdiff_t>(t));
          auto& counts = lm.tables_[j][ctx];
          ++counts.total;
          ++counts.next[seq[t]];
        }
      }
    }
    return lm;
  }

  TokenDistribution predict(std::span<const TokenId> context) const override {
    const auto& counts = lookup(context);
    const double k = options_.smoothing_k;
    const double denom = static_cast<double>(counts.total) + k * static_cast<double>(vocab_size_);
    std::vector<double> p(vocab_size_, k / denom);
    for (const auto& [tok, c] : counts.next) p[tok] = (static_cast<double>(c) + k) / denom;
    return TokenDistribution(std::move(p));
  }

  /// Decayed sum of hashed projections of the last `window` tokens,
  /// L2-normalised. The empty context maps to the zero vector.
  ContextEmbedding embed(std::span<const TokenId> context) const override {
    const auto acc = embed_double(context);
    ContextEmbedding e;
    e.values.assign(acc.begin(), acc.end());
    return e;
  }

  /// Same vector as embed() before rounding to single precision.
  std::vector<double> embed_double(std::span<const TokenId> context) const {
    std::vector<double> acc(options_.dim, 0.0);
    const std::size_t m = std::min(options_.window, context.size());
    if (m == 0) return acc;
    double weight = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      const TokenId tok = context[context.size() - 1 - j];
      for (std::size_t i = 0; i < options_.dim; ++i) {
        acc[i] += weight * detail::projection_weight(options_.seed, tok, j, i);
      }
      weight *= options_.decay;
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (auto& v : acc) v /= norm;
    }
    return acc;
  }

  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t embedding_dim() const override { return options_.dim; }
  const NgramOptions& options() const { return options_; }
  const std::vector<CountTable>& tables() const { return tables_; }

  /// Binary model file: "KNMLM1", order u32, smoothing_k f64, vocab_size u64,
  /// embedding parameters, then one count table per context length.
  std::string serialize() const {
    binary::Writer w;
    w.bytes(kMagic);
    w.u32(static_cast<std::uint32_t>(options_.order));
    w.f64(options_.smoothing_k);
    w.u64(vocab_size_);
    w.u32(static_cast<std::uint32_t>(options_.dim));
    w.u32(static_cast<std::uint32_t>(options_.window));
    w.f64(options_.decay);
    w.u64(options_.seed);
    for (const auto& table : tables_) {
      w.u64(table.size());
      for (const auto& [ctx, counts] : table) {
        for (TokenId t : ctx) w.u32(t);
        w.u64(counts.total);
        w.u32(static_cast<std::uint32_t>(counts.next.size()));
        for (const auto& [tok, c] : counts.next) {
          w.u32(tok);
          w.u64(c);
        }
      }
    }
    return std::move(w.data());
  }

  static NgramLanguageModel deserialize(std::string_view data) {
    binary::Reader r(data);
    if (data.size() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
      throw FormatError("not a language model file (bad magic)");
    }
    NgramOptions opt;
    opt.order = static_cast<int>(r.u32());
    opt.smoothing_k = r.f64();
    const auto vocab = r.u64();
    opt.dim = r.u32();
    opt.window = r.u32();
    opt.decay = r.f64();
    opt.seed = r.u64();
    if (opt.order < 1 || opt.order > 3 || !(opt.smoothing_k > 0.0) || opt.dim == 0) {
      throw FormatError("language model file has invalid parameters");
    }
    NgramLanguageModel lm(vocab, opt);
    for (std::size_t j = 0; j < static_cast<std::size_t>(opt.order); ++j) {
      const auto n_ctx = r.u64();
      for (std::uint64_t c = 0; c < n_ctx; ++c) {
        std::vector<TokenId> ctx(j);
        for (auto& t : ctx) t = r.u32();
        ContextCounts counts;
        counts.total = r.u64();
        const auto n_next = r.u32();
        for (std::uint32_t q = 0; q < n_next; ++q) {
          const TokenId tok = r.u32();
          if (tok >= vocab) throw FormatError("language model file: token id out of range");
          counts.next[tok] = r.u64();
        }
        lm.tables_[j].emplace(std::move(ctx), std::move(counts));
      }
    }
    if (r.remaining() != 0) throw FormatError("language model file: trailing bytes");
    return lm;
  }

  void save(const std::string& path) const { binary::write_file(path, serialize()); }
  static NgramLanguageModel load(const std::string& path) {
    return deserialize(binary::read_file(path));
  }

 private:
  static constexpr std::string_view kMagic = "KNMLM1";

  void validate() const {
    if (options_.order < 1 || options_.order > 3) {
      throw ConfigError("n-gram order must be 1, 2 or 3");
    }
    if (!(options_.smoothing_k > 0.0)) throw ConfigError("smoothing_k must be > 0");
    if (options_.dim == 0) throw ConfigError("embedding dimension must be > 0");
    if (vocab_size_ < 2) throw ConfigError("vocabulary must hold the reserved tokens");
  }

  // Longest seen suffix of the context, at most order-1 tokens.
  const ContextCounts& lookup(std::span<const TokenId> context) const {
    static const ContextCounts kEmpty;
    const std::size_t max_len =
        std::min(static_cast<std::size_t>(options_.order - 1), context.size());
    for (std::size_t j = max_len; j > 0; --j) {
      std::vector<TokenId> key(context.end() - static_cast<std::ptrdiff_t>(j), context.end());
      auto it = tables_[j].find(key);
      if (it != tables_[j].end() && it->second.total > 0) return it->second;
    }
    auto it = tables_[0].find({});
    return it == tables_[0].end() ? kEmpty : it->second;
  }

  NgramOptions options_;
  std::size_t vocab_size_;
  std::vector<CountTable> tables_;
};

/// exp of the mean negative log-probability of every position.
inline double perplexity(const LanguageModel& lm, std::span<const TokenSequence> corpus) {
  double nll = 0.0;
  std::size_t n = 0;
  for (const auto& seq : corpus) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const auto p = lm.predict(std::span<const TokenId>(seq).first(t));
      nll -= std::log(p[seq[t]]);
      ++n;
    }
  }
  if (n == 0) throw EmptyInput("perplexity of an empty corpus");
  return std::exp(nll / static_cast<double>(n));
}

}  // namespace knm
