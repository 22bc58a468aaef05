#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fuzzyjoin/join.hpp"
#include "fuzzyjoin/mining.hpp"
#include "fuzzyjoin/trainer.hpp"

namespace fuzzyjoin::testing {

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t char_dim = 32;
  std::vector<std::size_t> layers{32, 32};
  std::size_t k = 20;
  std::size_t n_trees = kDefaultTrees;
  MiningConfig mining;
  TrainConfig train;
};

struct ExperimentResult {
  SpaceStats baseline;  // test identities, input space
  EvalReport trained;   // test identities, embedding space
  TrainReport report;
  std::size_t train_triplets = 0;
  std::size_t validation_triplets = 0;
  Model model;
};

/// Split by identity, mine within train and validation separately, train,
/// then score the test identities before and after training.
ExperimentResult run_experiment(std::span<const EntityRecord> entities,
                                const ExperimentConfig& cfg);

}  // namespace fuzzyjoin::testing
