#include "experiment.hpp"

#include <unordered_set>

namespace fuzzyjoin::testing {

namespace {

std::vector<TripletIdx> mine_within(const ItemCatalog& catalog,
                                    std::span<const std::uint64_t> identities,
                                    const ExperimentConfig& cfg) {
  const auto sub = catalog.subset(identities);
  const auto forest = build_forest(sub.indexed_vectors(), cfg.n_trees, kDefaultLeafSize,
                                   cfg.seed, cfg.train.threads);
  return mine(sub, forest, cfg.mining);
}

}  // namespace

ExperimentResult run_experiment(std::span<const EntityRecord> entities,
                                const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> ids;
  std::vector<std::string> names;
  for (const auto& e : entities) {
    ids.push_back(e.identity_id);
    names.insert(names.end(), e.names.begin(), e.names.end());
  }
  const auto split = split_dataset(ids, {0.6, 0.2, 0.2}, cfg.seed);
  auto table = random_char_embeddings(charset_of(names), cfg.char_dim, cfg.seed);
  const auto catalog = ItemCatalog::from_entities(entities, table);

  ExperimentResult res;
  const auto train_trip = mine_within(catalog, split.train, cfg);
  const auto val_trip = mine_within(catalog, split.validation, cfg);
  res.train_triplets = train_trip.size();
  res.validation_triplets = val_trip.size();

  const auto init = init_params(cfg.layers, cfg.char_dim, cfg.seed);
  auto trained = train_partitioned(train_trip, val_trip, catalog, cfg.train, init);
  res.report = trained.report;
  res.model = Model::make(std::move(table), std::move(trained.params), cfg.train.loss);

  const auto test_cat = catalog.subset(split.test);
  const auto test_forest = build_forest(test_cat.indexed_vectors(), cfg.n_trees,
                                        kDefaultLeafSize, cfg.seed, cfg.train.threads);
  res.baseline = baseline_stats(test_cat, test_forest, cfg.k, cfg.train.threads);

  std::unordered_set<std::uint64_t> test_ids(split.test.begin(), split.test.end());
  std::vector<EntityRecord> test_entities;
  for (const auto& e : entities) {
    if (test_ids.count(e.identity_id)) test_entities.push_back(e);
  }
  EvalConfig ec;
  ec.k = cfg.k;
  ec.n_trees = cfg.n_trees;
  ec.seed = cfg.seed;
  ec.threads = cfg.train.threads;
  res.trained = evaluate(test_entities, res.model, ec);
  return res;
}

}  // namespace fuzzyjoin::testing
