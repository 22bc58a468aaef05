#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "fuzzyjoin/ann_index.hpp"
#include "test_util.hpp"

using namespace fuzzyjoin;
using fuzzyjoin::testing::code_of;

namespace {

std::vector<IndexedVector> random_items(std::size_t n, std::size_t dim, std::uint64_t seed,
                                        ItemId first_id = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<IndexedVector> items(n);
  for (std::size_t i = 0; i < n; ++i) {
    items[i].id = first_id + i;
    items[i].values.resize(dim);
    for (float& x : items[i].values) x = u(rng);
  }
  return items;
}

std::vector<IndexedVector> toy() {
  return {{1, {0, 0}}, {2, {1, 0}}, {3, {5, 5}}};
}

}  // namespace

TEST(BuildForest, SingleItemIsOneLeaf) {
  const auto f = build_forest(std::vector<IndexedVector>{{7, {1, 2, 3}}}, 4, 2, 1);
  ASSERT_EQ(f.n_trees(), 4u);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(f.leaves(t), (std::vector<std::vector<ItemId>>{{7}}));
  }
}

TEST(BuildForest, IdenticalVectorsForceLeaf) {
  std::vector<IndexedVector> items;
  for (ItemId i = 0; i < 50; ++i) items.push_back({i, {0.5f, 0.5f}});
  const auto f = build_forest(items, 2, 4, 1);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto leaves = f.leaves(t);
    ASSERT_EQ(leaves.size(), 1u);
    EXPECT_EQ(leaves[0].size(), 50u);
  }
}

TEST(BuildForest, EveryItemOncePerTree) {
  const auto items = random_items(1000, 16, 3);
  const auto f = build_forest(items, 8, 16, 5);
  for (std::size_t t = 0; t < f.n_trees(); ++t) {
    std::multiset<ItemId> seen;
    for (const auto& leaf : f.leaves(t)) {
      EXPECT_LE(leaf.size(), 16u);
      seen.insert(leaf.begin(), leaf.end());
    }
    ASSERT_EQ(seen.size(), 1000u);
    EXPECT_EQ(std::set<ItemId>(seen.begin(), seen.end()).size(), 1000u);
  }
}

TEST(BuildForest, NormalsAreNonZero) {
  const auto f = build_forest(random_items(300, 8, 4), 3, 8, 2);
  for (std::size_t t = 0; t < f.n_trees(); ++t) {
    const auto& tree = f.tree(t);
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
      if (tree.nodes[n].leaf) continue;
      double sq = 0;
      for (std::size_t d = 0; d < 8; ++d) sq += tree.normals[n * 8 + d] * tree.normals[n * 8 + d];
      EXPECT_GT(sq, 0.0);
    }
  }
}

TEST(BuildForest, DeterministicAndThreadIndependent) {
  const auto items = random_items(500, 6, 8);
  const auto a = build_forest(items, 6, 10, 42, 1);
  const auto b = build_forest(items, 6, 10, 42, 3);
  for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(a.leaves(t), b.leaves(t));
  const auto c = build_forest(items, 6, 10, 43, 1);
  EXPECT_NE(a.leaves(0), c.leaves(0));
}

TEST(BuildForest, Errors) {
  EXPECT_EQ(code_of([] { build_forest(std::vector<IndexedVector>{}, 1, 1, 0); }),
            ErrorCode::EmptyInput);
  EXPECT_EQ(code_of([] {
              build_forest(std::vector<IndexedVector>{{1, {0, 0}}, {2, {0}}}, 1, 1, 0);
            }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] {
              build_forest(std::vector<IndexedVector>{{1, {0, 0}}, {1, {1, 0}}}, 1, 1, 0);
            }),
            ErrorCode::DuplicateId);
}

TEST(Query, ToyUnlimited) {
  const auto f = build_forest(toy(), 3, 1, 1);
  const std::vector<float> q{0.9f, 0.0f};
  const auto got = f.query(std::span<const float>(q), QueryConfig::unlimited(2));
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].id, 2u);
  EXPECT_NEAR(got[0].distance, 0.1, 1e-6);
  EXPECT_EQ(got[1].id, 1u);
  EXPECT_NEAR(got[1].distance, 0.9, 1e-6);
}

TEST(Query, ExactHitAndExclusion) {
  const auto f = build_forest(toy(), 3, 1, 1);
  const std::vector<float> q{1, 0};
  QueryConfig cfg;
  cfg.k = 1;
  const auto hit = f.query(std::span<const float>(q), cfg);
  ASSERT_EQ(hit.size(), 1u);
  EXPECT_EQ(hit[0], (Neighbor{2, 0.0}));
  cfg.exclude = 2;
  const auto next = f.query(std::span<const float>(q), cfg);
  ASSERT_EQ(next.size(), 1u);
  EXPECT_EQ(next[0], (Neighbor{1, 1.0}));
}

TEST(Query, DimensionMismatch) {
  const auto f = build_forest(toy(), 1, 1, 1);
  const std::vector<float> q{1, 0, 0};
  EXPECT_EQ(code_of([&] { f.query(std::span<const float>(q), QueryConfig{}); }),
            ErrorCode::DimensionMismatch);
}

TEST(Query, UnlimitedMatchesBruteForce) {
  const auto items = random_items(400, 5, 11);
  const auto f = build_forest(items, 4, 8, 3);
  const auto queries = random_items(30, 5, 12);
  for (const auto& q : queries) {
    EXPECT_EQ(f.query(std::span<const float>(q.values), QueryConfig::unlimited(7)),
              brute_force_knn(items, q.values, 7));
  }
}

TEST(Query, NeverReturnsExcluded) {
  const auto items = random_items(300, 4, 13);
  const auto f = build_forest(items, 4, 8, 3);
  for (std::size_t i = 0; i < 50; ++i) {
    QueryConfig cfg;
    cfg.k = 5;
    cfg.exclude = items[i].id;
    for (const auto& n : f.query(std::span<const float>(items[i].values), cfg)) {
      EXPECT_NE(n.id, items[i].id);
    }
  }
}

TEST(Query, ResultsSortedAndUnique) {
  const auto items = random_items(500, 4, 14);
  const auto f = build_forest(items, 8, 8, 3);
  const auto queries = random_items(20, 4, 15);
  for (const auto& q : queries) {
    QueryConfig cfg;
    cfg.k = 10;
    const auto got = f.query(std::span<const float>(q.values), cfg);
    EXPECT_LE(got.size(), 10u);
    std::set<ItemId> ids;
    for (std::size_t i = 0; i < got.size(); ++i) {
      ids.insert(got[i].id);
      if (i > 0) {
        EXPECT_TRUE(got[i - 1].distance < got[i].distance ||
                    (got[i - 1].distance == got[i].distance && got[i - 1].id < got[i].id));
      }
    }
    EXPECT_EQ(ids.size(), got.size());
  }
}

TEST(Query, BudgetBelowKRejected) {
  const auto f = build_forest(toy(), 1, 1, 1);
  QueryConfig cfg;
  cfg.k = 3;
  cfg.search_budget = 2;
  const std::vector<float> q{0, 0};
  EXPECT_EQ(code_of([&] { f.query(std::span<const float>(q), cfg); }),
            ErrorCode::InvalidArgument);
}

TEST(BruteForce, ColinearOrderedByOffset) {
  const std::vector<IndexedVector> items{{1, {3, 0}}, {2, {-1, 0}}, {3, {2, 0}}};
  const std::vector<float> q{0, 0};
  const auto got = brute_force_knn(items, q, 3);
  EXPECT_EQ(got, (NeighborList{{2, 1.0}, {3, 2.0}, {1, 3.0}}));
}

TEST(BruteForce, ClampsAndBreaksTiesById) {
  const std::vector<IndexedVector> items{{9, {1, 0}}, {4, {0, 1}}};
  const std::vector<float> q{0, 0};
  EXPECT_EQ(brute_force_knn(items, q, 10), (NeighborList{{4, 1.0}, {9, 1.0}}));
}

TEST(IndexFile, RoundTripIsBitwise) {
  const auto items = random_items(100, 6, 21);
  const auto f = build_forest(items, 5, 4, 9);
  std::stringstream io;
  save_index(f, io);
  const auto g = load_index(io);
  EXPECT_EQ(g.size(), f.size());
  EXPECT_EQ(g.dim(), f.dim());
  for (std::size_t t = 0; t < f.n_trees(); ++t) EXPECT_EQ(g.leaves(t), f.leaves(t));
  const auto queries = random_items(50, 6, 22);
  for (const auto& q : queries) {
    QueryConfig cfg;
    cfg.k = 5;
    EXPECT_EQ(f.query(std::span<const float>(q.values), cfg),
              g.query(std::span<const float>(q.values), cfg));
  }
}

TEST(IndexFile, Corruption) {
  const auto f = build_forest(random_items(40, 3, 1), 2, 4, 1);
  std::stringstream io;
  save_index(f, io);
  const std::string bytes = io.str();

  std::istringstream truncated(bytes.substr(0, bytes.size() - 7));
  EXPECT_EQ(code_of([&] { load_index(truncated); }), ErrorCode::FormatError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream bm(bad_magic);
  EXPECT_EQ(code_of([&] { load_index(bm); }), ErrorCode::FormatError);

  std::string future = bytes;
  future[4] = 2;
  std::istringstream fv(future);
  EXPECT_EQ(code_of([&] { load_index(fv); }), ErrorCode::VersionMismatch);
}

TEST(IndexFile, HeaderLayout) {
  const auto f = build_forest(std::vector<IndexedVector>{{5, {1.5f}}}, 1, 1, 0);
  std::stringstream io;
  save_index(f, io);
  const std::string b = io.str();
  // magic, version, dim, count, n_trees, item (id, value), leaf tag, count, id
  ASSERT_EQ(b.size(), 4u + 4 + 4 + 8 + 4 + (8 + 4) + 1 + 4 + 8);
  EXPECT_EQ(b.substr(0, 4), "AJF1");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[12]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[20]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[24]), 5);
  EXPECT_EQ(static_cast<unsigned char>(b[36]), 1);
}
