#include "fuzzyjoin/metrics.hpp"

#include <algorithm>

#include "fuzzyjoin/error.hpp"
#include "fuzzyjoin/parallel.hpp"

namespace fuzzyjoin {

std::vector<NeighborList> self_excluded_neighborhoods(
    const AnnForest& forest, std::size_t k,
    std::optional<std::size_t> search_budget, std::size_t threads) {
  std::vector<NeighborList> out(forest.size());
  parallel_for(forest.size(), threads, [&](std::size_t pos) {
    QueryConfig cfg;
    cfg.k = k;
    cfg.search_budget = search_budget;
    cfg.exclude = forest.id_at(pos);
    out[pos] = forest.query(forest.vector_at(pos), cfg);
  });
  return out;
}

EvalReport retrieval_metrics(
    std::span<const ItemId> anchors,
    const std::unordered_map<ItemId, std::uint64_t>& identity_of,
    std::span<const NeighborList> neighborhoods, std::size_t k) {
  if (anchors.size() != neighborhoods.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one neighborhood per anchor expected");
  }
  std::unordered_map<std::uint64_t, std::size_t> group_size;
  for (const auto& [id, identity] : identity_of) ++group_size[identity];

  auto identity = [&](ItemId id) {
    auto it = identity_of.find(id);
    if (it == identity_of.end()) {
      throw Error(ErrorCode::InvalidArgument,
                  "item " + std::to_string(id) + " has no identity");
    }
    return it->second;
  };

  EvalReport report;
  report.k = k;
  std::size_t hits = 0;
  std::size_t possible = 0;
  std::size_t first_hits = 0;
  double precision_sum = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto own = identity(anchors[i]);
    const std::size_t positives = group_size[own] - 1;
    if (positives == 0) continue;
    ++report.anchors_evaluated;
    const std::size_t cap = std::min(positives, k);

    const auto& nbrs = neighborhoods[i];
    std::size_t found = 0;
    std::size_t leading = 0;
    bool mistake_seen = false;
    for (std::size_t r = 0; r < nbrs.size() && r < k; ++r) {
      const bool positive = identity(nbrs[r].id) == own && nbrs[r].id != anchors[i];
      if (positive) {
        ++found;
        if (!mistake_seen) ++leading;
      } else {
        mistake_seen = true;
      }
    }
    hits += found;
    possible += cap;
    if (!nbrs.empty() && identity(nbrs.front().id) == own &&
        nbrs.front().id != anchors[i]) {
      ++first_hits;
    }
    precision_sum += static_cast<double>(std::min(leading, cap)) /
                     static_cast<double>(cap);
  }
  if (report.anchors_evaluated > 0) {
    const auto n = static_cast<double>(report.anchors_evaluated);
    report.recall = static_cast<double>(hits) / static_cast<double>(possible);
    report.precision_at_1 = static_cast<double>(first_hits) / n;
    report.precision_all = precision_sum / n;
  }
  return report;
}

}  // namespace fuzzyjoin
