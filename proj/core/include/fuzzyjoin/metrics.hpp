#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "fuzzyjoin/ann_index.hpp"

namespace fuzzyjoin {

struct EvalReport {
  std::size_t k = 0;
  double recall = 0.0;
  double precision_at_1 = 0.0;
  double precision_all = 0.0;
  std::size_t anchors_evaluated = 0;
};

/// Top-k neighborhoods of every indexed item with the item itself excluded,
/// in forest position order.
std::vector<NeighborList> self_excluded_neighborhoods(
    const AnnForest& forest, std::size_t k,
    std::optional<std::size_t> search_budget = std::nullopt,
    std::size_t threads = 1);

/// Retrieval quality of `neighborhoods[i]` around `anchors[i]`, where an
/// item's positives are the other items sharing its identity.
///
///   recall         = Σ |top-k ∩ P(f)| / Σ min(|P(f)|, k)
///   precision@1    = share of anchors whose first neighbor is in P(f)
///   precision_all  = mean of (#P(f) before the first non-P(f)) / min(|P(f)|, k)
///
/// Anchors without positives are skipped.
EvalReport retrieval_metrics(
    std::span<const ItemId> anchors,
    const std::unordered_map<ItemId, std::uint64_t>& identity_of,
    std::span<const NeighborList> neighborhoods, std::size_t k);

}  // namespace fuzzyjoin
