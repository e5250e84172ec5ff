#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "knm/retrieval.hpp"

namespace knm {
namespace {

Datastore random_store(std::size_t n, std::size_t dim, std::uint64_t seed, std::size_t vocab = 50) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(vocab - 1));
  Datastore s(DatastoreMode::full, dim);
  std::vector<float> key(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : key) x = u(rng);
    s.append(key, tok(rng));
  }
  s.set_counts(n, 0);
  return s;
}

/// Exhaustive scan written independently of the index.
std::vector<Neighbor> brute_force(const Datastore& s, std::span<const float> q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double acc = 0.0;
    const auto key = s.key(i);
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double d = static_cast<double>(key[j]) - static_cast<double>(q[j]);
      acc += d * d;
    }
    all.emplace_back(acc, i);
  }
  std::sort(all.begin(), all.end());
  std::vector<Neighbor> out;
  for (std::size_t r = 0; r < std::min(k, all.size()); ++r) {
    out.push_back({all[r].second, std::sqrt(all[r].first), s.value(all[r].second)});
  }
  return out;
}

std::vector<float> random_query(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> q(dim);
  for (auto& x : q) x = u(rng);
  return q;
}

TEST(Retrieval, SingleEntryExactMatch) {
  Datastore s(DatastoreMode::full, 3);
  const std::vector<float> key{0.5f, -1.0f, 2.0f};
  s.append(key, 7);
  s.set_counts(1, 0);
  const auto nb = FlatIndex(s).search(key, 4);
  ASSERT_EQ(nb.items.size(), 1u);
  EXPECT_EQ(nb.items[0].distance, 0.0);
  EXPECT_EQ(nb.items[0].value, 7u);
  EXPECT_EQ(nb.k, 4u);
}

TEST(Retrieval, KIsClampedToEntryCount) {
  const auto s = random_store(5, 4, 1);
  std::mt19937_64 rng(2);
  EXPECT_EQ(FlatIndex(s).search(random_query(rng, 4), 100).items.size(), 5u);
}

TEST(Retrieval, EmptyStoreGivesEmptySet) {
  const Datastore s(DatastoreMode::decoupled, 4);
  const std::vector<float> q(4, 0.0f);
  const auto nb = FlatIndex(s).search(q, 3);
  EXPECT_TRUE(nb.empty());
  EXPECT_FALSE(nb.top1().has_value());
  EXPECT_FALSE(knm_distribution(nb, 10).has_value());
}

TEST(Retrieval, Errors) {
  const auto s = random_store(5, 4, 1);
  const FlatIndex index(s);
  const std::vector<float> wrong(3, 0.0f), right(4, 0.0f);
  EXPECT_THROW(index.search(wrong, 2), DimensionMismatch);
  EXPECT_THROW(index.search(right, 0), ConfigError);
}

TEST(Retrieval, MatchesExhaustiveScan) {
  const auto s = random_store(1000, 16, 3);
  const FlatIndex index(s);
  std::mt19937_64 rng(4);
  for (int q = 0; q < 100; ++q) {
    const auto query = random_query(rng, 16);
    EXPECT_EQ(index.search(query, 8).items, brute_force(s, query, 8)) << "query " << q;
  }
}

TEST(Retrieval, ExactUpToTenThousandEntriesForAnyPartitioning) {
  std::mt19937_64 rng(5);
  for (std::size_t n : {1u, 7u, 100u, 4096u, 10000u}) {
    const auto s = random_store(n, 8, n);
    for (unsigned parts : {1u, 3u, 8u}) {
      const FlatIndex index(s, parts);
      for (int q = 0; q < 5; ++q) {
        const auto query = random_query(rng, 8);
        EXPECT_EQ(index.search(query, 16).items, brute_force(s, query, 16)) << n << "/" << parts;
      }
    }
  }
}

TEST(Retrieval, TiesGoToLowerIndex) {
  Datastore s(DatastoreMode::full, 2);
  const std::vector<float> a{1.0f, 0.0f}, b{0.0f, 1.0f}, c{-1.0f, 0.0f};
  s.append(a, 1);
  s.append(b, 2);
  s.append(c, 3);
  s.append(a, 4);
  s.set_counts(4, 0);
  const std::vector<float> origin{0.0f, 0.0f};
  for (unsigned parts : {1u, 2u, 4u}) {
    const auto nb = FlatIndex(s, parts).search(origin, 3);
    ASSERT_EQ(nb.items.size(), 3u);
    EXPECT_EQ(nb.items[0].index, 0u);
    EXPECT_EQ(nb.items[1].index, 1u);
    EXPECT_EQ(nb.items[2].index, 2u);
  }
}

NeighborSet set_of(std::vector<std::pair<double, TokenId>> items) {
  NeighborSet s;
  for (std::size_t i = 0; i < items.size(); ++i) s.items.push_back({i, items[i].first, items[i].second});
  s.k = items.size();
  return s;
}

TEST(KnmDistribution, Examples) {
  const auto one = *knm_distribution(set_of({{0.0, 3}}), 5);
  EXPECT_EQ(one[3], 1.0);

  const auto two = *knm_distribution(set_of({{0.0, 1}, {std::log(2.0), 2}}), 5);
  EXPECT_NEAR(two[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(two[2], 1.0 / 3.0, 1e-15);

  const auto agg = *knm_distribution(set_of({{0.0, 1}, {0.0, 1}, {0.0, 2}}), 5);
  EXPECT_NEAR(agg[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(agg[2], 1.0 / 3.0, 1e-15);
}

TEST(KnmDistribution, ShiftStableNormalisedAndSupportedOnValues) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(0.0, 5.0);
  std::uniform_int_distribution<TokenId> tok(0, 19);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::pair<double, TokenId>> items(1 + trial % 10);
    for (auto& [dist, v] : items) {
      dist = d(rng);
      v = tok(rng);
    }
    auto shifted = items;
    for (auto& it : shifted) it.first += 3.25;
    const auto p = *knm_distribution(set_of(items), 20);
    const auto q = *knm_distribution(set_of(shifted), 20);
    EXPECT_TRUE(p.is_valid());
    for (TokenId y = 0; y < 20; ++y) {
      EXPECT_NEAR(p[y], q[y], 1e-12);
      const bool present = std::any_of(items.begin(), items.end(), [y](auto& it) { return it.second == y; });
      EXPECT_EQ(p[y] > 0.0, present);
    }
  }
}

TEST(KnmDistribution, FarNeighborsDoNotUnderflow) {
  const auto p = *knm_distribution(set_of({{900.0, 1}, {901.0, 2}}), 3);
  EXPECT_TRUE(p.is_valid());
  EXPECT_GT(p[1], p[2]);
}

TEST(KnmDistribution, ValueOutsideVocabularyIsError) {
  EXPECT_THROW(knm_distribution(set_of({{0.0, 9}}), 5), VocabMismatch);
}

}  // namespace
}  // namespace knm
