#include <gtest/gtest.h>

#include <sstream>

#include "fuzzyjoin/join.hpp"
#include "fuzzyjoin/mining.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace fuzzyjoin;
using fuzzyjoin::testing::code_of;

namespace {

std::vector<std::string> sample_names() {
  return {"Douglas Adams", "Adams, Douglas", "D. Adams", "Ada Lovelace", "Lovelace, Ada",
          "Alan Turing",   "A. Turing",      "Grace Hopper", "Hopper, G.", "Cher"};
}

Model small_model(LossKind kind = LossKind::Adapted, std::uint64_t seed = 3) {
  const auto names = sample_names();
  auto table = random_char_embeddings(charset_of(names), 8, seed);
  const std::vector<std::size_t> layers{6, 5};
  return Model::make(std::move(table), init_params(layers, 8, seed), LossParams::defaults(kind));
}

std::string serialize(const Model& m) {
  std::ostringstream out;
  save_model(m, out);
  return out.str();
}

Model deserialize(const std::string& bytes) {
  std::istringstream in(bytes);
  return load_model(in);
}

}  // namespace

TEST(Model, MakeQuantizesToFloat) {
  const auto m = small_model();
  for (double x : m.encoder.layers[0].values()) {
    EXPECT_EQ(x, static_cast<double>(static_cast<float>(x)));
  }
}

TEST(Model, RoundTripIsBitwise) {
  for (auto kind : {LossKind::Triplet, LossKind::Improved, LossKind::Angular, LossKind::Adapted}) {
    const auto m = small_model(kind);
    const auto back = deserialize(serialize(m));
    EXPECT_EQ(back.table.entries, m.table.entries);
    EXPECT_EQ(back.table.fallback, m.table.fallback);
    EXPECT_EQ(back.encoder, m.encoder);
    EXPECT_EQ(back.loss.kind, m.loss.kind);
    EXPECT_EQ(back.loss.normalize_inputs, m.loss.normalize_inputs);
    EXPECT_EQ(back.max_tokens, m.max_tokens);

    fuzzyjoin::testing::SyntheticPeopleConfig sc;
    sc.identities = 20;
    for (const auto& e : fuzzyjoin::testing::synthetic_people(sc)) {
      for (const auto& n : e.names) EXPECT_EQ(embed_name(n, back), embed_name(n, m)) << n;
    }
  }
}

TEST(Model, CorruptFilesRejected) {
  const auto bytes = serialize(small_model());
  EXPECT_EQ(code_of([&] { deserialize(bytes.substr(0, bytes.size() - 3)); }),
            ErrorCode::FormatError);
  EXPECT_EQ(code_of([&] { deserialize("XXXX" + bytes.substr(4)); }), ErrorCode::FormatError);
  EXPECT_EQ(code_of([&] { deserialize(""); }), ErrorCode::FormatError);

  auto future = bytes;
  future[4] = 2;
  EXPECT_EQ(code_of([&] { deserialize(future); }), ErrorCode::VersionMismatch);

  auto bad_header = bytes;
  bad_header[12] = '#';
  EXPECT_EQ(code_of([&] { deserialize(bad_header); }), ErrorCode::FormatError);
}

TEST(Model, ValidateCatchesDimensionMismatch) {
  auto table = random_char_embeddings({U'a'}, 4, 1);
  const std::vector<std::size_t> layers{3};
  EXPECT_EQ(code_of([&] {
              Model::make(table, init_params(layers, 5, 1), LossParams::defaults(LossKind::Adapted));
            }),
            ErrorCode::ShapeMismatch);
}

TEST(EmbedColumn, IdenticalStringsIdenticalVectors) {
  const auto m = small_model();
  const std::vector<std::string> col{"Ada Lovelace", "", "Ada Lovelace", " \t ", "Alan Turing"};
  const auto out = embed_column(col, m, 2);
  EXPECT_EQ(out.rows, (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_EQ(out.skipped, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(out.vectors[0], out.vectors[1]);
  EXPECT_NE(out.vectors[0], out.vectors[2]);
  EXPECT_EQ(out.vectors[0].size(), 5u);
}

TEST(EmbedColumn, ZeroModelUnderNormalizationFails) {
  auto m = small_model(LossKind::Adapted);
  m.encoder = m.encoder.zeros_like();
  for (double x : embed_name("Ada Lovelace", m)) EXPECT_EQ(x, 0.0);
  m.loss = LossParams::defaults(LossKind::Angular);
  EXPECT_EQ(code_of([&] { embed_name("Ada Lovelace", m); }), ErrorCode::ZeroVector);
}

TEST(EmbedName, NormalizedWhenLossNormalizes) {
  const auto m = small_model(LossKind::Improved);
  ASSERT_TRUE(m.loss.normalize_inputs);
  const auto v = embed_name("Grace Hopper", m);
  double sq = 0.0;
  for (double x : v) sq += x * x;
  EXPECT_NEAR(sq, 1.0, 1e-12);
}

TEST(Join, SelfJoinMatchesItself) {
  const auto m = small_model();
  const auto names = sample_names();
  JoinConfig cfg;
  const auto out = join(names, names, m, cfg);
  ASSERT_EQ(out.size(), names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_EQ(out[i].right_value, names[i]);
    EXPECT_EQ(out[i].left_value, names[i]);
    EXPECT_EQ(out[i].distance, 0.0);
    EXPECT_EQ(out[i].rank, 1u);
  }
}

TEST(Join, KLargerThanLeftClamps) {
  const auto m = small_model();
  const std::vector<std::string> left{"Ada Lovelace", "Alan Turing", ""};
  const std::vector<std::string> right{"Ada L.", "Grace Hopper"};
  JoinConfig cfg;
  cfg.k = 10;
  const auto out = join(left, right, m, cfg);
  ASSERT_EQ(out.size(), 4u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].right_value, right[i / 2]);
    EXPECT_EQ(out[i].rank, i % 2 + 1);
  }
  EXPECT_LE(out[0].distance, out[1].distance);
}

TEST(Join, EmptyColumns) {
  const auto m = small_model();
  const std::vector<std::string> some{"Ada"};
  const std::vector<std::string> none;
  const std::vector<std::string> blank{"", " "};
  JoinConfig cfg;
  EXPECT_EQ(code_of([&] { join(none, some, m, cfg); }), ErrorCode::EmptyColumn);
  EXPECT_EQ(code_of([&] { join(some, none, m, cfg); }), ErrorCode::EmptyColumn);
  EXPECT_EQ(code_of([&] { join(blank, some, m, cfg); }), ErrorCode::EmptyColumn);
}

TEST(Evaluate, ToyClusters) {
  const std::vector<IndexedVector> items{{0, {0.f, 0.f}}, {1, {0.f, 1.f}}, {2, {5.f, 5.f}}};
  const std::unordered_map<ItemId, std::uint64_t> ident{{0, 0}, {1, 0}, {2, 1}};
  EvalConfig cfg;
  cfg.k = 2;
  const auto r = evaluate_vectors(items, ident, cfg);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.precision_at_1, 1.0);
  EXPECT_DOUBLE_EQ(r.precision_all, 1.0);
  EXPECT_EQ(r.anchors_evaluated, 2u);
}

TEST(Evaluate, MatchesBaselineOnInputVectors) {
  fuzzyjoin::testing::SyntheticPeopleConfig sc;
  sc.identities = 60;
  const auto ents = fuzzyjoin::testing::synthetic_people(sc);
  std::vector<std::string> all;
  for (const auto& e : ents) all.insert(all.end(), e.names.begin(), e.names.end());
  const auto table = random_char_embeddings(charset_of(all), 8, 5);
  const auto catalog = ItemCatalog::from_entities(ents, table, kDefaultMaxTokens);
  const auto items = catalog.indexed_vectors();

  EvalConfig cfg;
  cfg.k = 10;
  const auto forest = build_forest(items, cfg.n_trees, cfg.leaf_size, cfg.seed, 1);
  const auto stats = baseline_stats(catalog, forest, cfg.k);
  const auto r = evaluate_vectors(items, catalog.identity_of(), cfg);
  EXPECT_EQ(r.recall, stats.recall_at_k);
  for (double m : {r.recall, r.precision_at_1, r.precision_all}) {
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
  }
}

TEST(Evaluate, EmbeddingPathInRange) {
  fuzzyjoin::testing::SyntheticPeopleConfig sc;
  sc.identities = 30;
  const auto ents = fuzzyjoin::testing::synthetic_people(sc);
  std::vector<std::string> all;
  for (const auto& e : ents) all.insert(all.end(), e.names.begin(), e.names.end());
  const std::vector<std::size_t> layers{6};
  const auto m = Model::make(random_char_embeddings(charset_of(all), 8, 2),
                             init_params(layers, 8, 2), LossParams::defaults(LossKind::Adapted));
  EvalConfig cfg;
  cfg.k = 5;
  const auto r = evaluate(ents, m, cfg);
  EXPECT_EQ(r.anchors_evaluated, all.size());
  EXPECT_GE(r.recall, 0.0);
  EXPECT_LE(r.recall, 1.0);
  EXPECT_EQ(code_of([&] { evaluate(std::span<const EntityRecord>{}, m, cfg); }),
            ErrorCode::EmptyInput);
}
