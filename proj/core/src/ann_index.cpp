#include "fuzzyjoin/ann_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "binary_io.hpp"
#include "fuzzyjoin/error.hpp"
#include "fuzzyjoin/parallel.hpp"

namespace fuzzyjoin {

namespace {

constexpr char kMagic[4] = {'A', 'J', 'F', '1'};
constexpr int kSplitAttempts = 4;

bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.id < b.id;
}

void keep_top_k(NeighborList& list, std::size_t k) {
  if (list.size() > k) {
    std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(k),
                      list.end(), neighbor_less);
    list.resize(k);
  } else {
    std::sort(list.begin(), list.end(), neighbor_less);
  }
}

void check_dim(std::size_t got, std::size_t want) {
  if (got != want) {
    throw Error(ErrorCode::DimensionMismatch,
                "vector has " + std::to_string(got) + " values, index dim is " +
                    std::to_string(want));
  }
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<float>& data, std::size_t dim,
              std::size_t leaf_size, std::uint64_t seed)
      : data_(data), dim_(dim), leaf_size_(leaf_size), rng_(seed) {}

  AnnForest::Tree build(std::vector<std::uint32_t> items) {
    build_node(items);
    return std::move(tree_);
  }

 private:
  std::span<const float> vec(std::uint32_t pos) const {
    return {data_.data() + static_cast<std::size_t>(pos) * dim_, dim_};
  }

  bool same(std::uint32_t a, std::uint32_t b) const {
    return std::equal(vec(a).begin(), vec(a).end(), vec(b).begin());
  }

  std::uint32_t make_leaf(std::uint32_t idx, std::span<const std::uint32_t> items) {
    auto& node = tree_.nodes[idx];
    node.leaf = true;
    node.first = static_cast<std::uint32_t>(tree_.leaf_items.size());
    node.count = static_cast<std::uint32_t>(items.size());
    tree_.leaf_items.insert(tree_.leaf_items.end(), items.begin(), items.end());
    return idx;
  }

  std::uint32_t build_node(std::vector<std::uint32_t>& items) {
    const auto idx = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.normals.resize(tree_.nodes.size() * dim_, 0.0f);
    if (items.size() <= leaf_size_) return make_leaf(idx, items);

    // Two distinct items chosen uniformly; a few retries when they coincide,
    // then a scan for any item differing from the first pick.
    const std::size_t m = items.size();
    std::uniform_int_distribution<std::size_t> pick_a(0, m - 1);
    std::uniform_int_distribution<std::size_t> pick_b(0, m - 2);
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    bool found = false;
    for (int attempt = 0; attempt < kSplitAttempts && !found; ++attempt) {
      const std::size_t i = pick_a(rng_);
      std::size_t j = pick_b(rng_);
      if (j >= i) ++j;
      a = items[i];
      b = items[j];
      found = !same(a, b);
    }
    if (!found) {
      for (std::uint32_t other : items) {
        if (!same(a, other)) {
          b = other;
          found = true;
          break;
        }
      }
    }
    if (!found) return make_leaf(idx, items);

    float* normal = tree_.normals.data() + static_cast<std::size_t>(idx) * dim_;
    const auto va = vec(a);
    const auto vb = vec(b);
    // Unit normal, so margins are Euclidean distances to the plane.
    double norm = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      const double diff = static_cast<double>(va[d]) - static_cast<double>(vb[d]);
      norm += diff * diff;
    }
    norm = std::sqrt(norm);
    double offset = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      normal[d] = static_cast<float>((static_cast<double>(va[d]) - static_cast<double>(vb[d])) / norm);
      offset += static_cast<double>(normal[d]) * 0.5 *
                (static_cast<double>(va[d]) + static_cast<double>(vb[d]));
    }
    const auto offset_f = static_cast<float>(offset);

    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    for (std::uint32_t it : items) {
      double s = -static_cast<double>(offset_f);
      const auto v = vec(it);
      for (std::size_t d = 0; d < dim_; ++d) {
        s += static_cast<double>(normal[d]) * static_cast<double>(v[d]);
      }
      (s > 0.0 ? left : right).push_back(it);
    }
    if (left.empty() || right.empty()) return make_leaf(idx, items);

    items.clear();
    items.shrink_to_fit();
    tree_.nodes[idx].leaf = false;
    tree_.nodes[idx].offset = offset_f;
    const auto l = build_node(left);
    const auto r = build_node(right);
    tree_.nodes[idx].left = l;
    tree_.nodes[idx].right = r;
    return idx;
  }

  const std::vector<float>& data_;
  std::size_t dim_;
  std::size_t leaf_size_;
  std::mt19937_64 rng_;
  AnnForest::Tree tree_;
};

}  // namespace

QueryConfig QueryConfig::unlimited(std::size_t k, std::optional<ItemId> exclude) {
  QueryConfig cfg;
  cfg.k = k;
  cfg.search_budget = std::numeric_limits<std::size_t>::max();
  cfg.exclude = exclude;
  return cfg;
}

double l2_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

AnnForest build_forest(std::span<const IndexedVector> items, std::size_t n_trees,
                       std::size_t leaf_size, std::uint64_t seed,
                       std::size_t threads) {
  if (items.empty()) throw Error(ErrorCode::EmptyInput, "no vectors to index");
  if (n_trees == 0 || leaf_size == 0) {
    throw Error(ErrorCode::InvalidArgument, "n_trees and leaf_size must be >= 1");
  }
  if (items.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::InvalidArgument, "too many items");
  }
  AnnForest f;
  f.dim_ = items.front().values.size();
  if (f.dim_ == 0) throw Error(ErrorCode::DimensionMismatch, "zero-length vectors");
  f.seed_ = seed;
  f.ids_.reserve(items.size());
  f.data_.reserve(items.size() * f.dim_);
  std::unordered_set<ItemId> seen;
  for (const auto& it : items) {
    check_dim(it.values.size(), f.dim_);
    if (!seen.insert(it.id).second) {
      throw Error(ErrorCode::DuplicateId, "item id " + std::to_string(it.id) +
                                              " appears twice");
    }
    f.ids_.push_back(it.id);
    f.data_.insert(f.data_.end(), it.values.begin(), it.values.end());
  }

  std::vector<std::uint32_t> all(items.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  f.trees_.resize(n_trees);
  parallel_for(n_trees, threads, [&](std::size_t t) {
    TreeBuilder builder(f.data_, f.dim_, leaf_size, derive_seed(seed, t));
    f.trees_[t] = builder.build(all);
  });
  return f;
}

std::vector<std::vector<ItemId>> AnnForest::leaves(std::size_t t) const {
  std::vector<std::vector<ItemId>> out;
  const auto& tr = trees_.at(t);
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const auto& n = tr.nodes[stack.back()];
    stack.pop_back();
    if (n.leaf) {
      std::vector<ItemId> ids;
      for (std::uint32_t i = 0; i < n.count; ++i) ids.push_back(ids_[tr.leaf_items[n.first + i]]);
      out.push_back(std::move(ids));
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

double AnnForest::margin(const Tree& tree, const Node& node,
                         std::uint32_t node_index, std::span<const float> q) const {
  const float* normal = tree.normals.data() + static_cast<std::size_t>(node_index) * dim_;
  double s = -static_cast<double>(node.offset);
  for (std::size_t d = 0; d < dim_; ++d) {
    s += static_cast<double>(normal[d]) * static_cast<double>(q[d]);
  }
  return s;
}

NeighborList AnnForest::query(std::span<const float> q, const QueryConfig& cfg) const {
  check_dim(q.size(), dim_);
  if (cfg.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  const std::size_t budget =
      cfg.search_budget.value_or(trees_.size() * cfg.k * 8);
  if (budget < cfg.k) throw Error(ErrorCode::InvalidArgument, "search budget < k");

  struct Entry {
    double priority;
    std::uint32_t tree;
    std::uint32_t node;
  };
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.priority != b.priority) return a.priority < b.priority;
    if (a.tree != b.tree) return a.tree > b.tree;
    return a.node > b.node;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> frontier(worse);
  for (std::uint32_t t = 0; t < trees_.size(); ++t) {
    frontier.push({std::numeric_limits<double>::infinity(), t, 0});
  }

  std::vector<char> seen(ids_.size(), 0);
  std::vector<std::uint32_t> candidates;
  while (!frontier.empty() && candidates.size() < budget) {
    const Entry e = frontier.top();
    frontier.pop();
    const auto& tree = trees_[e.tree];
    const auto& node = tree.nodes[e.node];
    if (node.leaf) {
      for (std::uint32_t i = 0; i < node.count; ++i) {
        const auto pos = tree.leaf_items[node.first + i];
        if (!seen[pos]) {
          seen[pos] = 1;
          candidates.push_back(pos);
        }
      }
      continue;
    }
    const double m = margin(tree, node, e.node, q);
    frontier.push({std::min(e.priority, m), e.tree, node.left});
    frontier.push({std::min(e.priority, -m), e.tree, node.right});
  }

  NeighborList out;
  out.reserve(candidates.size());
  for (auto pos : candidates) {
    if (cfg.exclude && ids_[pos] == *cfg.exclude) continue;
    out.push_back({ids_[pos], l2_distance(vector_at(pos), q)});
  }
  keep_top_k(out, cfg.k);
  return out;
}

NeighborList AnnForest::query(std::span<const double> q, const QueryConfig& cfg) const {
  std::vector<float> qf(q.begin(), q.end());
  return query(std::span<const float>(qf), cfg);
}

NeighborList AnnForest::brute_force(std::span<const float> q, std::size_t k,
                                    std::optional<ItemId> exclude) const {
  check_dim(q.size(), dim_);
  NeighborList out;
  out.reserve(ids_.size());
  for (std::size_t pos = 0; pos < ids_.size(); ++pos) {
    if (exclude && ids_[pos] == *exclude) continue;
    out.push_back({ids_[pos], l2_distance(vector_at(pos), q)});
  }
  keep_top_k(out, k);
  return out;
}

NeighborList query(const AnnForest& forest, std::span<const float> q,
                   const QueryConfig& cfg) {
  return forest.query(q, cfg);
}

NeighborList brute_force_knn(std::span<const IndexedVector> items,
                             std::span<const float> q, std::size_t k,
                             std::optional<ItemId> exclude) {
  NeighborList out;
  out.reserve(items.size());
  for (const auto& it : items) {
    check_dim(it.values.size(), q.size());
    if (exclude && it.id == *exclude) continue;
    out.push_back({it.id, l2_distance(it.values, q)});
  }
  keep_top_k(out, k);
  return out;
}

void save_index(const AnnForest& f, std::ostream& out) {
  detail::BinaryWriter w;
  w.bytes(std::string(kMagic, 4));
  w.u32(kIndexFormatVersion);
  w.u32(static_cast<std::uint32_t>(f.dim_));
  w.u64(f.ids_.size());
  w.u32(static_cast<std::uint32_t>(f.trees_.size()));
  for (std::size_t pos = 0; pos < f.ids_.size(); ++pos) {
    w.u64(f.ids_[pos]);
    for (float v : f.vector_at(pos)) w.f32(v);
  }
  for (const auto& tree : f.trees_) {
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
      const auto idx = stack.back();
      stack.pop_back();
      const auto& n = tree.nodes[idx];
      if (n.leaf) {
        w.u8(1);
        w.u32(n.count);
        for (std::uint32_t i = 0; i < n.count; ++i) {
          w.u64(f.ids_[tree.leaf_items[n.first + i]]);
        }
      } else {
        w.u8(0);
        const float* normal = tree.normals.data() + static_cast<std::size_t>(idx) * f.dim_;
        for (std::size_t d = 0; d < f.dim_; ++d) w.f32(normal[d]);
        w.f32(n.offset);
        stack.push_back(n.right);
        stack.push_back(n.left);
      }
    }
  }
  w.flush_to(out);
}

namespace {

// Rebuilds one preorder-serialized tree.
class TreeReader {
 public:
  TreeReader(detail::BinaryReader& r, std::size_t dim,
             const std::unordered_map<ItemId, std::uint32_t>& positions)
      : r_(r), dim_(dim), positions_(positions), seen_(positions.size(), 0) {}

  AnnForest::Tree read() {
    read_node(0);
    for (char s : seen_) {
      if (!s) throw Error(ErrorCode::FormatError, "tree does not cover every item");
    }
    return std::move(tree_);
  }

 private:
  std::uint32_t read_node(std::size_t depth) {
    if (depth > positions_.size() + 1) {
      throw Error(ErrorCode::FormatError, "tree deeper than item count");
    }
    const auto idx = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.normals.resize(tree_.nodes.size() * dim_, 0.0f);
    const auto tag = r_.u8();
    if (tag == 1) {
      const auto count = r_.u32();
      if (count > positions_.size()) throw Error(ErrorCode::FormatError, "leaf too large");
      tree_.nodes[idx].first = static_cast<std::uint32_t>(tree_.leaf_items.size());
      tree_.nodes[idx].count = count;
      for (std::uint32_t i = 0; i < count; ++i) {
        auto it = positions_.find(r_.u64());
        if (it == positions_.end() || seen_[it->second]) {
          throw Error(ErrorCode::FormatError, "leaf references unknown or repeated item");
        }
        seen_[it->second] = 1;
        tree_.leaf_items.push_back(it->second);
      }
      return idx;
    }
    if (tag != 0) throw Error(ErrorCode::FormatError, "bad node tag");
    for (std::size_t d = 0; d < dim_; ++d) {
      tree_.normals[static_cast<std::size_t>(idx) * dim_ + d] = r_.f32();
    }
    tree_.nodes[idx].leaf = false;
    tree_.nodes[idx].offset = r_.f32();
    const auto l = read_node(depth + 1);
    const auto rr = read_node(depth + 1);
    tree_.nodes[idx].left = l;
    tree_.nodes[idx].right = rr;
    return idx;
  }

  detail::BinaryReader& r_;
  std::size_t dim_;
  const std::unordered_map<ItemId, std::uint32_t>& positions_;
  std::vector<char> seen_;
  AnnForest::Tree tree_;
};

}  // namespace

AnnForest load_index(std::istream& in) {
  detail::BinaryReader r(in);
  if (r.bytes(4) != std::string(kMagic, 4)) {
    throw Error(ErrorCode::FormatError, "not an index file (bad magic)");
  }
  const auto version = r.u32();
  if (version != kIndexFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "index format version " + std::to_string(version) +
                    " is not supported (expected " +
                    std::to_string(kIndexFormatVersion) + ")");
  }
  AnnForest f;
  f.dim_ = r.u32();
  const auto count = r.u64();
  const auto n_trees = r.u32();
  if (f.dim_ == 0 || count == 0 || n_trees == 0 ||
      count > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::FormatError, "invalid index header");
  }
  std::unordered_map<ItemId, std::uint32_t> positions;
  for (std::uint64_t pos = 0; pos < count; ++pos) {
    const auto id = r.u64();
    if (!positions.emplace(id, static_cast<std::uint32_t>(pos)).second) {
      throw Error(ErrorCode::FormatError, "duplicate item id in index");
    }
    f.ids_.push_back(id);
    for (std::size_t d = 0; d < f.dim_; ++d) f.data_.push_back(r.f32());
  }
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    f.trees_.push_back(TreeReader(r, f.dim_, positions).read());
  }
  return f;
}

}  // namespace fuzzyjoin
