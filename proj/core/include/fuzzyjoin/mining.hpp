#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fuzzyjoin/ann_index.hpp"
#include "fuzzyjoin/data_pipeline.hpp"
#include "fuzzyjoin/name_encoding.hpp"

namespace fuzzyjoin {

struct CatalogItem {
  ItemId item_id = 0;
  std::uint64_t identity_id = 0;
  std::string surface_form;
  /// Flattened NameEncoding (max_tokens x dim).
  std::vector<float> input_vector;
  std::size_t valid_len = 0;
};

/// Every surface form of every identity, addressable by item id.
class ItemCatalog {
 public:
  ItemCatalog() = default;
  /// Throws Error(DuplicateId) on repeated item ids.
  explicit ItemCatalog(std::vector<CatalogItem> items);

  /// Item ids are assigned sequentially over (entity order, name order).
  static ItemCatalog from_entities(std::span<const EntityRecord> entities,
                                   const CharEmbeddingTable& table,
                                   std::size_t max_tokens = kDefaultMaxTokens);

  const std::vector<CatalogItem>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  bool contains(ItemId id) const { return position_.count(id) != 0; }
  /// Throws Error(InvalidArgument) for unknown ids.
  const CatalogItem& at(ItemId id) const;
  /// Item ids of an identity in ascending order.
  const std::vector<ItemId>& members(std::uint64_t identity) const;
  const std::unordered_map<ItemId, std::uint64_t>& identity_of() const noexcept {
    return identity_of_;
  }

  /// Items whose identity is in `identities`, ids preserved.
  ItemCatalog subset(std::span<const std::uint64_t> identities) const;
  std::vector<IndexedVector> indexed_vectors() const;

 private:
  std::vector<CatalogItem> items_;
  std::unordered_map<ItemId, std::size_t> position_;
  std::unordered_map<ItemId, std::uint64_t> identity_of_;
  std::unordered_map<std::uint64_t, std::vector<ItemId>> members_;
};

enum class MiningStrategy { Hard, SemiHard };

std::string_view to_string(MiningStrategy s) noexcept;
MiningStrategy parse_mining_strategy(std::string_view name);

struct MiningConfig {
  std::size_t k = 20;
  MiningStrategy strategy = MiningStrategy::Hard;
  std::size_t max_triplets_per_anchor = 50;
  std::uint64_t seed = 0;
  /// Forwarded to QueryConfig; unset means the index default.
  std::optional<std::size_t> search_budget;
  std::size_t threads = 1;
};

struct TripletIdx {
  ItemId anchor_id = 0;
  ItemId positive_id = 0;
  ItemId negative_id = 0;

  friend bool operator==(const TripletIdx&, const TripletIdx&) = default;
};

struct SpaceStats {
  std::size_t k = 0;
  double recall_at_k = 0.0;
  double mean_pos_dist = 0.0;
  double std_pos_dist = 0.0;
  double mean_neg_dist = 0.0;
  double std_neg_dist = 0.0;
};

/// Row-major flattening of the encoding.
std::vector<float> input_vector(const NameEncoding& enc);

/// Rebuilds the encoder input of a catalog item with `dim` columns.
NameEncoding encoding_of(const CatalogItem& item, std::size_t dim);

/// For each anchor: every other form of its identity paired with every
/// other-identity item in its top-k neighborhood, ordered by
/// (neighbor rank, positive id) and capped per anchor.
std::vector<TripletIdx> mine_hard(const ItemCatalog& catalog,
                                  const AnnForest& forest,
                                  const MiningConfig& cfg);

/// For each anchor and positive: other-identity items in the positive's
/// top-k neighborhood that lie strictly farther from the anchor than the
/// positive does.
std::vector<TripletIdx> mine_semi_hard(const ItemCatalog& catalog,
                                       const AnnForest& forest,
                                       const MiningConfig& cfg);

std::vector<TripletIdx> mine(const ItemCatalog& catalog, const AnnForest& forest,
                             const MiningConfig& cfg);

/// Input-space layout: neighborhood recall plus positive and in-neighborhood
/// negative distance moments (population std).
SpaceStats baseline_stats(const ItemCatalog& catalog, const AnnForest& forest,
                          std::size_t k, std::size_t threads = 1);

/// TSV `anchor_id<TAB>positive_id<TAB>negative_id`, one per line.
void write_triplets(std::span<const TripletIdx> triplets, std::ostream& out);
std::vector<TripletIdx> read_triplets(std::istream& in);

}  // namespace fuzzyjoin
