#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace fuzzyjoin {

using ItemId = std::uint64_t;

struct IndexedVector {
  ItemId id = 0;
  std::vector<float> values;
};

struct Neighbor {
  ItemId id = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Ascending by distance, ties by ascending id.
using NeighborList = std::vector<Neighbor>;

struct QueryConfig {
  std::size_t k = 10;
  /// Maximum number of distinct leaf items inspected. Unset means
  /// n_trees * k * 8.
  std::optional<std::size_t> search_budget;
  std::optional<ItemId> exclude;

  static QueryConfig unlimited(std::size_t k,
                               std::optional<ItemId> exclude = std::nullopt);
};

/// Distance in double precision between single-precision vectors.
double l2_distance(std::span<const float> a, std::span<const float> b);

/// Forest of random-projection trees. Each internal node splits its items by
/// the perpendicular bisector of two of them; leaves hold at most leaf_size
/// items unless all remaining vectors coincide. Immutable once built.
class AnnForest {
 public:
  struct Node {
    bool leaf = true;
    std::uint32_t left = 0;   // internal
    std::uint32_t right = 0;  // internal
    float offset = 0.0f;      // internal
    std::uint32_t first = 0;  // leaf: range into Tree::leaf_items
    std::uint32_t count = 0;  // leaf
  };

  struct Tree {
    std::vector<Node> nodes;          // nodes[0] is the root
    std::vector<float> normals;       // dim floats per node, leaves unused
    std::vector<std::uint32_t> leaf_items;  // item positions
  };

  AnnForest() = default;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t n_trees() const noexcept { return trees_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  ItemId id_at(std::size_t pos) const { return ids_[pos]; }
  std::span<const float> vector_at(std::size_t pos) const {
    return {data_.data() + pos * dim_, dim_};
  }
  const Tree& tree(std::size_t t) const { return trees_[t]; }

  /// Item ids of every leaf of tree `t`, in preorder.
  std::vector<std::vector<ItemId>> leaves(std::size_t t) const;

  NeighborList query(std::span<const float> q, const QueryConfig& cfg) const;
  NeighborList query(std::span<const double> q, const QueryConfig& cfg) const;

  /// Exact scan over the indexed items with the same tie rule.
  NeighborList brute_force(std::span<const float> q, std::size_t k,
                           std::optional<ItemId> exclude = std::nullopt) const;

  friend AnnForest build_forest(std::span<const IndexedVector> items,
                                std::size_t n_trees, std::size_t leaf_size,
                                std::uint64_t seed, std::size_t threads);
  friend void save_index(const AnnForest& forest, std::ostream& out);
  friend AnnForest load_index(std::istream& in);

 private:
  double margin(const Tree& tree, const Node& node, std::uint32_t node_index,
                std::span<const float> q) const;

  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<ItemId> ids_;
  std::vector<float> data_;
  std::vector<Tree> trees_;
};

/// Throws Error(EmptyInput), Error(DimensionMismatch) or Error(DuplicateId).
AnnForest build_forest(std::span<const IndexedVector> items,
                       std::size_t n_trees, std::size_t leaf_size,
                       std::uint64_t seed, std::size_t threads = 1);

NeighborList query(const AnnForest& forest, std::span<const float> q,
                   const QueryConfig& cfg);

/// Exact k nearest by Euclidean distance; the oracle for query().
NeighborList brute_force_knn(std::span<const IndexedVector> items,
                             std::span<const float> q, std::size_t k,
                             std::optional<ItemId> exclude = std::nullopt);

inline constexpr std::uint32_t kIndexFormatVersion = 1;
inline constexpr std::size_t kDefaultTrees = 16;
inline constexpr std::size_t kDefaultLeafSize = 16;

/// Little-endian binary, magic "AJF1". See README for the layout.
void save_index(const AnnForest& forest, std::ostream& out);
/// Throws Error(FormatError) or Error(VersionMismatch).
AnnForest load_index(std::istream& in);

}  // namespace fuzzyjoin
