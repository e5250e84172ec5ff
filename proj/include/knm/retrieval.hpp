#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "knm/datastore.hpp"
#include "knm/distribution.hpp"
#include "knm/errors.hpp"

namespace knm {

struct Neighbor {
  std::size_t index = 0;  // entry index in the datastore
  double distance = 0.0;  // L2, not squared
  TokenId value = 0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Ascending by distance, ties by ascending entry index.
struct NeighborSet {
  std::vector<Neighbor> items;
  std::size_t k = 0;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
  std::optional<TokenId> top1() const {
    if (items.empty()) return std::nullopt;
    return items.front().value;
  }
};

/// Squared L2 distance, accumulated in double in coordinate order.
inline double squared_l2(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    acc += diff * diff;
  }
  return acc;
}

/// Exact k-NN over a datastore's keys: a partitioned linear scan. Each
/// partition keeps its own bounded top-k and the partial results are merged,
/// so answers do not depend on the partition count. The datastore must
/// outlive the index.
class FlatIndex {
 public:
  explicit FlatIndex(const Datastore& store, unsigned partitions = 1)
      : store_(&store), partitions_(std::max(1u, partitions)) {}

  std::size_t dim() const { return store_->dim(); }
  std::size_t size() const { return store_->size(); }
  const Datastore& store() const { return *store_; }

  NeighborSet search(std::span<const float> query, std::size_t k) const {
    if (k == 0) throw ConfigError("k must be >= 1");
    if (query.size() != store_->dim()) {
      throw DimensionMismatch("query has dimension " + std::to_string(query.size()) +
                              ", index has " + std::to_string(store_->dim()));
    }
    NeighborSet out;
    out.k = k;
    const std::size_t n = store_->size();
    if (n == 0) return out;

    const std::size_t parts = std::min<std::size_t>(partitions_, n);
    std::vector<std::vector<Candidate>> partial(parts);
    auto scan = [&](std::size_t p) {
      const std::size_t lo = n * p / parts;
      const std::size_t hi = n * (p + 1) / parts;
      partial[p] = scan_range(query, k, lo, hi);
    };
    if (parts == 1 || n < kParallelThreshold) {
      for (std::size_t p = 0; p < parts; ++p) scan(p);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(parts);
      for (std::size_t p = 0; p < parts; ++p) pool.emplace_back(scan, p);
    }

    std::vector<Candidate> merged;
    for (auto& v : partial) merged.insert(merged.end(), v.begin(), v.end());
    const std::size_t keep = std::min(k, merged.size());
    std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(keep),
                      merged.end());
    out.items.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      out.items.push_back({merged[i].index, std::sqrt(merged[i].sq), store_->value(merged[i].index)});
    }
    return out;
  }

  NeighborSet search(const ContextEmbedding& query, std::size_t k) const {
    return search(std::span<const float>(query.values), k);
  }

 private:
  static constexpr std::size_t kParallelThreshold = 4096;

  struct Candidate {
    double sq;
    std::size_t index;
    friend auto operator<=>(const Candidate&, const Candidate&) = default;
  };

  std::vector<Candidate> scan_range(std::span<const float> query, std::size_t k, std::size_t lo,
                                    std::size_t hi) const {
    // Max-heap on (sq, index): the root is the current worst kept candidate.
    std::vector<Candidate> heap;
    heap.reserve(std::min(k, hi - lo) + 1);
    for (std::size_t i = lo; i < hi; ++i) {
      const Candidate c{squared_l2(store_->key(i), query), i};
      if (heap.size() < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end());
      } else if (c < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return heap;
  }

  const Datastore* store_;
  unsigned partitions_;
};

/// Softmax over negative neighbor distances, with the mass of every neighbor
/// added to its value's slot. Tokens not retrieved get zero. Returns nullopt
/// for an empty neighbor set. Distances are shifted by their minimum before
/// exponentiation; no temperature is applied.
inline std::optional<TokenDistribution> knm_distribution(const NeighborSet& neighbors,
                                                         std::size_t vocab_size) {
  if (neighbors.empty()) return std::nullopt;
  double dmin = neighbors.items.front().distance;
  for (const auto& nb : neighbors.items) dmin = std::min(dmin, nb.distance);
  std::vector<double> p(vocab_size, 0.0);
  double z = 0.0;
  for (const auto& nb : neighbors.items) {
    if (nb.value >= vocab_size) {
      throw VocabMismatch("neighbor value " + std::to_string(nb.value) +
                          " outside vocabulary of size " + std::to_string(vocab_size));
    }
    const double w = std::exp(-(nb.distance - dmin));
    p[nb.value] += w;
    z += w;
  }
  for (auto& v : p) v /= z;
  return TokenDistribution(std::move(p));
}

}  // namespace knm
