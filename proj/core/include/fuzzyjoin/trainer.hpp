#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "fuzzyjoin/encoder.hpp"
#include "fuzzyjoin/losses.hpp"
#include "fuzzyjoin/mining.hpp"

namespace fuzzyjoin {

struct DatasetSplit {
  std::vector<std::uint64_t> train;
  std::vector<std::uint64_t> validation;
  std::vector<std::uint64_t> test;
};

/// Seeded shuffle, then contiguous train/validation/test blocks sized by the
/// largest-remainder rule. Throws Error(TooFewIdentities) below 3 identities
/// and Error(InvalidArgument) for bad ratios.
DatasetSplit split_dataset(std::span<const std::uint64_t> identities,
                           std::array<double, 3> ratios, std::uint64_t seed);

enum class SplitLevel { Identity, Triplet };

std::string_view to_string(SplitLevel level) noexcept;
SplitLevel parse_split_level(std::string_view name);

struct TripletPartition {
  std::vector<TripletIdx> train;
  std::vector<TripletIdx> validation;
  std::vector<TripletIdx> test;
};

/// Keeps triplets whose anchor, positive and negative all belong to the same
/// split; mixed triplets are discarded.
TripletPartition partition_by_identity(std::span<const TripletIdx> triplets,
                                       const ItemCatalog& catalog,
                                       const DatasetSplit& split);

/// Splits the triplet list itself, ignoring identities.
TripletPartition partition_by_triplet(std::span<const TripletIdx> triplets,
                                      std::array<double, 3> ratios,
                                      std::uint64_t seed);

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
  LossParams loss = LossParams::defaults(LossKind::Adapted);
  std::size_t threads = 1;

  /// Throws Error(InvalidArgument).
  void validate() const;
};

enum class StopReason { Patience, MaxEpochs };

std::string_view to_string(StopReason reason) noexcept;

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean per triplet
  double validation_accuracy = 0.0;
  double grad_norm = 0.0;   // mean pre-clip norm per batch

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  double initial_validation_accuracy = 0.0;
  std::vector<EpochRecord> epochs;
  /// 0 when no epoch improved on the initial parameters.
  std::size_t best_epoch = 0;
  double best_validation_accuracy = 0.0;
  StopReason stop_reason = StopReason::MaxEpochs;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

struct TrainResult {
  EncoderParams params;
  TrainReport report;
};

/// Fraction of triplets with d(a, p) < d(a, n) under the loss's
/// normalization policy. Throws Error(EmptyInput).
double triplet_accuracy(std::span<const TripletIdx> triplets,
                        const ItemCatalog& catalog, const EncoderParams& params,
                        const LossParams& loss, std::size_t threads = 1);

struct BatchGradient {
  double loss = 0.0;  // summed over the batch
  EncoderParams grad;
};

/// Summed loss of a batch and its gradient with respect to the encoder
/// parameters. Throws Error(EmptyBatch).
BatchGradient batch_gradient(std::span<const TripletIdx> batch, const ItemCatalog& catalog,
                             const EncoderParams& params, const LossParams& loss,
                             std::size_t threads = 1);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on summed per-triplet gradients with global-norm clipping and early
/// stopping on validation accuracy. Returns the best validation parameters.
/// Throws Error(EmptyInput) or Error(NonFiniteLoss).
TrainResult train_partitioned(std::span<const TripletIdx> train_triplets,
                              std::span<const TripletIdx> validation_triplets,
                              const ItemCatalog& catalog, const TrainConfig& cfg,
                              const EncoderParams& init,
                              const EpochCallback& on_epoch = {});

/// Partitions `triplets` by identity and trains on the train/validation parts.
TrainResult train(std::span<const TripletIdx> triplets, const ItemCatalog& catalog,
                  const DatasetSplit& split, const TrainConfig& cfg,
                  const EncoderParams& init, const EpochCallback& on_epoch = {});

struct MarginRun {
  double margin = 0.0;
  TrainReport report;
};

struct GridSearchResult {
  double best_margin = 0.0;
  EncoderParams best_params;
  std::vector<MarginRun> runs;
};

/// One training run per margin; the best has the highest best-epoch
/// validation accuracy, ties to the smaller margin. Throws Error(EmptyInput).
GridSearchResult grid_search_margin(std::span<const double> margins,
                                    std::span<const TripletIdx> train_triplets,
                                    std::span<const TripletIdx> validation_triplets,
                                    const ItemCatalog& catalog,
                                    const TrainConfig& cfg,
                                    const EncoderParams& init);

}  // namespace fuzzyjoin
