#include "fuzzyjoin/mining.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "fuzzyjoin/error.hpp"
#include "fuzzyjoin/metrics.hpp"
#include "fuzzyjoin/parallel.hpp"
#include "fuzzyjoin/utf8.hpp"

namespace fuzzyjoin {

ItemCatalog::ItemCatalog(std::vector<CatalogItem> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end(),
            [](const CatalogItem& a, const CatalogItem& b) { return a.item_id < b.item_id; });
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& it = items_[i];
    if (!position_.emplace(it.item_id, i).second) {
      throw Error(ErrorCode::DuplicateId, "item id " + std::to_string(it.item_id) + " repeated");
    }
    identity_of_.emplace(it.item_id, it.identity_id);
    members_[it.identity_id].push_back(it.item_id);
  }
}

ItemCatalog ItemCatalog::from_entities(std::span<const EntityRecord> entities,
                                       const CharEmbeddingTable& table,
                                       std::size_t max_tokens) {
  std::vector<CatalogItem> items;
  ItemId next = 0;
  for (const auto& e : entities) {
    for (const auto& name : e.names) {
      CatalogItem it;
      it.item_id = next++;
      it.identity_id = e.identity_id;
      it.surface_form = name;
      const auto enc = encode_name(tokenize(name), table, max_tokens);
      it.input_vector = input_vector(enc);
      it.valid_len = enc.valid_len;
      items.push_back(std::move(it));
    }
  }
  return ItemCatalog(std::move(items));
}

const CatalogItem& ItemCatalog::at(ItemId id) const {
  auto it = position_.find(id);
  if (it == position_.end()) {
    throw Error(ErrorCode::InvalidArgument, "item " + std::to_string(id) + " not in catalog");
  }
  return items_[it->second];
}

const std::vector<ItemId>& ItemCatalog::members(std::uint64_t identity) const {
  static const std::vector<ItemId> none;
  auto it = members_.find(identity);
  return it == members_.end() ? none : it->second;
}

ItemCatalog ItemCatalog::subset(std::span<const std::uint64_t> identities) const {
  std::vector<CatalogItem> out;
  for (auto identity : identities) {
    for (ItemId id : members(identity)) out.push_back(at(id));
  }
  return ItemCatalog(std::move(out));
}

std::vector<IndexedVector> ItemCatalog::indexed_vectors() const {
  std::vector<IndexedVector> out;
  out.reserve(items_.size());
  for (const auto& it : items_) out.push_back({it.item_id, it.input_vector});
  return out;
}

std::string_view to_string(MiningStrategy s) noexcept {
  return s == MiningStrategy::Hard ? "hard" : "semi-hard";
}

MiningStrategy parse_mining_strategy(std::string_view name) {
  if (name == "hard") return MiningStrategy::Hard;
  if (name == "semi-hard" || name == "semi_hard") return MiningStrategy::SemiHard;
  throw Error(ErrorCode::InvalidArgument, "unknown mining strategy '" + std::string(name) + "'");
}

std::vector<float> input_vector(const NameEncoding& enc) {
  return {enc.matrix.begin(), enc.matrix.end()};
}

NameEncoding encoding_of(const CatalogItem& item, std::size_t dim) {
  if (dim == 0 || item.input_vector.size() % dim != 0) {
    throw Error(ErrorCode::ShapeMismatch, "item vector is not a multiple of dim");
  }
  NameEncoding enc;
  enc.dim = dim;
  enc.max_tokens = item.input_vector.size() / dim;
  enc.valid_len = item.valid_len;
  enc.matrix.assign(item.input_vector.begin(), item.input_vector.end());
  return enc;
}

namespace {

void check_mining_inputs(const ItemCatalog& catalog, const MiningConfig& cfg) {
  if (catalog.empty()) throw Error(ErrorCode::EmptyCatalog, "catalog has no items");
  if (cfg.k == 0 || cfg.max_triplets_per_anchor == 0) {
    throw Error(ErrorCode::InvalidArgument, "k and max_triplets_per_anchor must be >= 1");
  }
}

NeighborList neighbors_of(const AnnForest& forest, const CatalogItem& item,
                          const MiningConfig& cfg) {
  QueryConfig q;
  q.k = cfg.k;
  q.search_budget = cfg.search_budget;
  q.exclude = item.item_id;
  return forest.query(std::span<const float>(item.input_vector), q);
}

// Candidate before truncation: (rank, positive id) ordering key.
struct Ranked {
  std::size_t rank;
  TripletIdx triplet;
};

void append_capped(std::vector<Ranked>& cands, std::size_t cap,
                   std::vector<TripletIdx>& out) {
  std::stable_sort(cands.begin(), cands.end(), [](const Ranked& a, const Ranked& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.triplet.positive_id < b.triplet.positive_id;
  });
  const std::size_t n = std::min(cap, cands.size());
  for (std::size_t i = 0; i < n; ++i) out.push_back(cands[i].triplet);
}

// Self-excluded top-k neighborhood of every catalog item, by position.
std::vector<NeighborList> all_neighborhoods(const ItemCatalog& catalog,
                                            const AnnForest& forest,
                                            const MiningConfig& cfg) {
  const auto& items = catalog.items();
  std::vector<NeighborList> out(items.size());
  parallel_for(items.size(), cfg.threads,
               [&](std::size_t i) { out[i] = neighbors_of(forest, items[i], cfg); });
  return out;
}

template <class PerAnchor>
std::vector<TripletIdx> mine_per_anchor(const ItemCatalog& catalog,
                                        const MiningConfig& cfg, PerAnchor fn) {
  const auto& items = catalog.items();
  std::vector<std::vector<TripletIdx>> per(items.size());
  parallel_for(items.size(), cfg.threads, [&](std::size_t i) { per[i] = fn(i); });
  std::vector<TripletIdx> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

}  // namespace

std::vector<TripletIdx> mine_hard(const ItemCatalog& catalog, const AnnForest& forest,
                                  const MiningConfig& cfg) {
  check_mining_inputs(catalog, cfg);
  const auto nbhd = all_neighborhoods(catalog, forest, cfg);
  return mine_per_anchor(catalog, cfg, [&](std::size_t ai) {
    const auto& anchor = catalog.items()[ai];
    const auto& nbrs = nbhd[ai];
    std::vector<TripletIdx> out;
    std::vector<Ranked> cands;
    for (std::size_t rank = 0; rank < nbrs.size(); ++rank) {
      const auto& neg = catalog.at(nbrs[rank].id);
      if (neg.identity_id == anchor.identity_id) continue;
      for (ItemId pos : catalog.members(anchor.identity_id)) {
        if (pos == anchor.item_id) continue;
        cands.push_back({rank, {anchor.item_id, pos, neg.item_id}});
      }
    }
    append_capped(cands, cfg.max_triplets_per_anchor, out);
    return out;
  });
}

std::vector<TripletIdx> mine_semi_hard(const ItemCatalog& catalog,
                                       const AnnForest& forest,
                                       const MiningConfig& cfg) {
  check_mining_inputs(catalog, cfg);
  const auto nbhd = all_neighborhoods(catalog, forest, cfg);
  std::unordered_map<ItemId, std::size_t> position;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    position.emplace(catalog.items()[i].item_id, i);
  }
  return mine_per_anchor(catalog, cfg, [&](std::size_t ai) {
    const auto& anchor = catalog.items()[ai];
    std::vector<TripletIdx> out;
    std::vector<Ranked> cands;
    for (ItemId pos_id : catalog.members(anchor.identity_id)) {
      if (pos_id == anchor.item_id) continue;
      const auto& pos = catalog.at(pos_id);
      const double d_pos = l2_distance(anchor.input_vector, pos.input_vector);
      const auto& nbrs = nbhd[position.at(pos_id)];
      for (std::size_t rank = 0; rank < nbrs.size(); ++rank) {
        const auto& neg = catalog.at(nbrs[rank].id);
        if (neg.identity_id == anchor.identity_id) continue;
        if (l2_distance(anchor.input_vector, neg.input_vector) > d_pos) {
          cands.push_back({rank, {anchor.item_id, pos_id, neg.item_id}});
        }
      }
    }
    append_capped(cands, cfg.max_triplets_per_anchor, out);
    return out;
  });
}

std::vector<TripletIdx> mine(const ItemCatalog& catalog, const AnnForest& forest,
                             const MiningConfig& cfg) {
  return cfg.strategy == MiningStrategy::Hard ? mine_hard(catalog, forest, cfg)
                                              : mine_semi_hard(catalog, forest, cfg);
}

SpaceStats baseline_stats(const ItemCatalog& catalog, const AnnForest& forest,
                          std::size_t k, std::size_t threads) {
  if (catalog.empty()) throw Error(ErrorCode::EmptyCatalog, "catalog has no items");
  const auto nbrs = self_excluded_neighborhoods(forest, k, std::nullopt, threads);
  std::vector<ItemId> anchors(forest.size());
  for (std::size_t pos = 0; pos < forest.size(); ++pos) anchors[pos] = forest.id_at(pos);

  SpaceStats s;
  s.k = k;
  s.recall_at_k = retrieval_metrics(anchors, catalog.identity_of(), nbrs, k).recall;

  auto moments = [](const std::vector<double>& xs, double& mean, double& sd) {
    if (xs.empty()) return;
    double sum = 0.0;
    for (double x : xs) sum += x;
    mean = sum / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / static_cast<double>(xs.size()));
  };

  std::vector<double> pos_d;
  for (const auto& a : catalog.items()) {
    for (ItemId p : catalog.members(a.identity_id)) {
      if (p != a.item_id) pos_d.push_back(l2_distance(a.input_vector, catalog.at(p).input_vector));
    }
  }
  std::vector<double> neg_d;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto own = catalog.at(anchors[i]).identity_id;
    for (const auto& n : nbrs[i]) {
      if (catalog.at(n.id).identity_id != own) neg_d.push_back(n.distance);
    }
  }
  moments(pos_d, s.mean_pos_dist, s.std_pos_dist);
  moments(neg_d, s.mean_neg_dist, s.std_neg_dist);
  return s;
}

void write_triplets(std::span<const TripletIdx> triplets, std::ostream& out) {
  for (const auto& t : triplets) {
    out << t.anchor_id << '\t' << t.positive_id << '\t' << t.negative_id << '\n';
  }
}

std::vector<TripletIdx> read_triplets(std::istream& in) {
  std::vector<TripletIdx> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (utf8::trim(line).empty()) continue;
    ItemId v[3];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int c = 0; c < 3; ++c) {
      auto [next, ec] = std::from_chars(p, end, v[c]);
      const char want = c < 2 ? '\t' : '\0';
      const bool ok = ec == std::errc() && (c < 2 ? (next < end && *next == want) : next == end);
      if (!ok) {
        throw Error(ErrorCode::FormatError,
                    "triplet line " + std::to_string(line_no) + " is malformed");
      }
      p = next + 1;
    }
    out.push_back({v[0], v[1], v[2]});
  }
  return out;
}

}  // namespace fuzzyjoin
