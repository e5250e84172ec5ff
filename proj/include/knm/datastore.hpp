#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <zlib.h>

#include "knm/binary_io.hpp"
#include "knm/distribution.hpp"
#include "knm/errors.hpp"
#include "knm/lm_backend.hpp"
#include "knm/tokenizer.hpp"

namespace knm {

enum class DatastoreMode : std::uint8_t {
  decoupled = 0,  // only positions the LM gets wrong
  full = 1,       // every position (kNN-LM store)
};

inline std::string_view to_string(DatastoreMode m) {
  return m == DatastoreMode::decoupled ? "decoupled" : "full";
}

inline DatastoreMode parse_datastore_mode(std::string_view s) {
  if (s == "decoupled") return DatastoreMode::decoupled;
  if (s == "full") return DatastoreMode::full;
  throw ConfigError("unknown datastore mode '" + std::string(s) + "' (expected decoupled or full)");
}

struct DatastoreEntry {
  ContextEmbedding key;
  TokenId value = 0;
};

/// Where an entry came from: corpus sequence index and token position.
struct EntryOrigin {
  std::size_t sequence = 0;
  std::size_t position = 0;
  friend bool operator==(const EntryOrigin&, const EntryOrigin&) = default;
};

/// Key/value store of (context embedding, next token) pairs plus the corpus
/// statistics behind the error-rate prior. Keys live in one contiguous
/// row-major float buffer.
class Datastore {
 public:
  Datastore() = default;
  Datastore(DatastoreMode mode, std::size_t dim) : mode_(mode), dim_(dim) {}

  DatastoreMode mode() const { return mode_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::uint64_t total_tokens() const { return total_tokens_; }
  std::uint64_t mistake_tokens() const { return mistake_tokens_; }

  /// LM argmax error rate over the corpus: mistakes / total, 0 for an empty
  /// corpus.
  double err() const {
    return total_tokens_ == 0
               ? 0.0
               : static_cast<double>(mistake_tokens_) / static_cast<double>(total_tokens_);
  }

  std::span<const float> key(std::size_t i) const {
    return std::span<const float>(keys_).subspan(i * dim_, dim_);
  }
  TokenId value(std::size_t i) const { return values_[i]; }
  std::span<const float> keys() const { return keys_; }
  std::span<const TokenId> values() const { return values_; }

  DatastoreEntry entry(std::size_t i) const {
    const auto k = key(i);
    return {ContextEmbedding{{k.begin(), k.end()}}, values_[i]};
  }

  void append(std::span<const float> key, TokenId value) {
    if (key.size() != dim_) {
      throw DimensionMismatch("datastore key has dimension " + std::to_string(key.size()) +
                              ", expected " + std::to_string(dim_));
    }
    keys_.insert(keys_.end(), key.begin(), key.end());
    values_.push_back(value);
  }

  void set_counts(std::uint64_t total_tokens, std::uint64_t mistake_tokens) {
    total_tokens_ = total_tokens;
    mistake_tokens_ = mistake_tokens;
  }

  /// Throws FormatError if the mode/count invariants do not hold.
  void check_invariants() const {
    if (mistake_tokens_ > total_tokens_) throw FormatError("datastore: mistakes exceed total tokens");
    if (mode_ == DatastoreMode::decoupled && size() != mistake_tokens_) {
      throw FormatError("datastore: decoupled entry count != mistake count");
    }
    if (mode_ == DatastoreMode::full && size() != total_tokens_) {
      throw FormatError("datastore: full entry count != total token count");
    }
  }

  friend bool operator==(const Datastore& a, const Datastore& b) {
    return a.mode_ == b.mode_ && a.dim_ == b.dim_ && a.total_tokens_ == b.total_tokens_ &&
           a.mistake_tokens_ == b.mistake_tokens_ && a.values_ == b.values_ &&
           a.keys_.size() == b.keys_.size() &&
           std::memcmp(a.keys_.data(), b.keys_.data(), a.keys_.size() * sizeof(float)) == 0;
  }

  // -- file format ---------------------------------------------------------
  //
  //   magic "KNMDS1" | version u32 | mode u8 | d u32 | total_tokens u64 |
  //   mistake_tokens u64 | entry_count u64 | entry_count x {d x f32, u32} |
  //   CRC32 (u32) of every preceding byte
  //
  // All integers and floats little-endian.

  static constexpr std::string_view kMagic = "KNMDS1";
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 6 + 4 + 1 + 4 + 8 + 8 + 8;
  static constexpr std::size_t kTrailerBytes = 4;

  static std::size_t record_bytes(std::size_t dim) { return dim * 4 + 4; }
  std::size_t serialized_size() const {
    return kHeaderBytes + size() * record_bytes(dim_) + kTrailerBytes;
  }

  std::string serialize() const {
    binary::Writer w;
    w.data().reserve(serialized_size());
    w.bytes(kMagic);
    w.u32(kVersion);
    w.u8(static_cast<std::uint8_t>(mode_));
    w.u32(static_cast<std::uint32_t>(dim_));
    w.u64(total_tokens_);
    w.u64(mistake_tokens_);
    w.u64(size());
    for (std::size_t i = 0; i < size(); ++i) {
      for (float f : key(i)) w.f32(f);
      w.u32(values_[i]);
    }
    w.u32(crc(w.data()));
    return std::move(w.data());
  }

  static Datastore deserialize(std::string_view data) {
    if (data.size() < kHeaderBytes + kTrailerBytes) {
      throw FormatError("datastore file too short (" + std::to_string(data.size()) + " bytes)");
    }
    binary::Reader r(data);
    if (r.bytes(kMagic.size()) != kMagic) throw FormatError("not a datastore file (bad magic)");
    const auto version = r.u32();
    if (version != kVersion) {
      throw FormatError("unsupported datastore version " + std::to_string(version));
    }
    const auto mode = r.u8();
    if (mode > 1) throw FormatError("datastore: bad mode byte");
    const std::size_t dim = r.u32();
    const auto total = r.u64();
    const auto mistakes = r.u64();
    const auto count = r.u64();
    if (dim == 0) throw FormatError("datastore: zero dimension");
    const auto rec = record_bytes(dim);
    if (count > (data.size() - kHeaderBytes) / rec ||
        data.size() != kHeaderBytes + count * rec + kTrailerBytes) {
      throw FormatError("datastore: file size does not match entry count (truncated?)");
    }
    const auto body = data.substr(0, data.size() - kTrailerBytes);
    binary::Reader tail(data.substr(data.size() - kTrailerBytes));
    if (tail.u32() != crc(body)) throw ChecksumError("datastore: CRC32 mismatch");

    Datastore s(static_cast<DatastoreMode>(mode), dim);
    s.keys_.resize(count * dim);
    s.values_.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      for (std::size_t j = 0; j < dim; ++j) s.keys_[i * dim + j] = r.f32();
      s.values_[i] = r.u32();
    }
    s.set_counts(total, mistakes);
    s.check_invariants();
    return s;
  }

  void save(const std::string& path) const { binary::write_file(path, serialize()); }
  static Datastore load(const std::string& path) { return deserialize(binary::read_file(path)); }

 private:
  static std::uint32_t crc(std::string_view bytes) {
    uLong c = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large bodies in chunks.
    constexpr std::size_t kChunk = 1u << 30;
    for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
      const auto len = std::min(kChunk, bytes.size() - off);
      c = crc32(c, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(len));
    }
    return static_cast<std::uint32_t>(c);
  }

  DatastoreMode mode_ = DatastoreMode::decoupled;
  std::size_t dim_ = 0;
  std::uint64_t total_tokens_ = 0;
  std::uint64_t mistake_tokens_ = 0;
  std::vector<float> keys_;
  std::vector<TokenId> values_;
};

struct BuildOptions {
  std::size_t dim = 64;
  unsigned threads = 0;  // 0: hardware concurrency
  std::vector<EntryOrigin>* origins = nullptr;  // optional provenance output
};

namespace detail {

struct SequenceShard {
  std::vector<float> keys;
  std::vector<TokenId> values;
  std::vector<std::size_t> positions;
  std::uint64_t mistakes = 0;
};

inline SequenceShard scan_sequence(std::span<const TokenId> seq, const LanguageModel& lm,
                                   DatastoreMode mode, std::size_t dim) {
  SequenceShard shard;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto ctx = seq.first(t);
    const bool mistake = lm.predict(ctx).argmax() != seq[t];
    if (mistake) ++shard.mistakes;
    if (mistake || mode == DatastoreMode::full) {
      const auto key = lm.embed(ctx);
      if (key.dim() != dim) {
        throw DimensionMismatch("model embedding has dimension " + std::to_string(key.dim()) +
                                ", expected " + std::to_string(dim));
      }
      shard.keys.insert(shard.keys.end(), key.values.begin(), key.values.end());
      shard.values.push_back(seq[t]);
      shard.positions.push_back(t);
    }
  }
  return shard;
}

inline Datastore build_store(std::span<const TokenSequence> corpus, const LanguageModel& lm,
                             DatastoreMode mode, const BuildOptions& options) {
  std::uint64_t total = 0;
  for (const auto& s : corpus) total += s.size();
  if (total == 0) throw EmptyCorpus("cannot build a datastore from an empty corpus");
  if (lm.embedding_dim() != options.dim) {
    throw DimensionMismatch("model embedding dimension " + std::to_string(lm.embedding_dim()) +
                            " != configured dimension " + std::to_string(options.dim));
  }

  std::vector<SequenceShard> shards(corpus.size());
  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                          : options.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, corpus.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      shards[i] = scan_sequence(corpus[i], lm, mode, options.dim);
    }
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < corpus.size(); i += threads) {
              shards[i] = scan_sequence(corpus[i], lm, mode, options.dim);
            }
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Merge in sequence order so the result is independent of thread count.
  Datastore store(mode, options.dim);
  std::uint64_t mistakes = 0;
  if (options.origins) options.origins->clear();
  for (std::size_t i = 0; i < shards.size(); ++i) {
    const auto& sh = shards[i];
    mistakes += sh.mistakes;
    for (std::size_t e = 0; e < sh.values.size(); ++e) {
      store.append(std::span<const float>(sh.keys).subspan(e * options.dim, options.dim),
                   sh.values[e]);
      if (options.origins) options.origins->push_back({i, sh.positions[e]});
    }
  }
  store.set_counts(total, mistakes);
  return store;
}

}  // namespace detail

/// Mistakes-only store: one entry (embed(prefix), token) for every corpus
/// position whose token differs from the model's argmax given the prefix.
inline Datastore build_decoupled(std::span<const TokenSequence> corpus, const LanguageModel& lm,
                                 const BuildOptions& options = {}) {
  return detail::build_store(corpus, lm, DatastoreMode::decoupled, options);
}

/// Store with an entry for every corpus position.
inline Datastore build_full(std::span<const TokenSequence> corpus, const LanguageModel& lm,
                            const BuildOptions& options = {}) {
  return detail::build_store(corpus, lm, DatastoreMode::full, options);
}

}  // namespace knm
