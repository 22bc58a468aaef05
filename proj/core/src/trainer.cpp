#include "fuzzyjoin/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "fuzzyjoin/error.hpp"
#include "fuzzyjoin/parallel.hpp"

namespace fuzzyjoin {

namespace {

void check_ratios(const std::array<double, 3>& ratios) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw Error(ErrorCode::InvalidArgument, "split ratios must sum to 1");
  }
}

// Largest-remainder apportionment of n into three parts.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[i] = exact - static_cast<double>(sizes[i]);
    used += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int i = 0; used < n; ++i, ++used) ++sizes[order[i % 3]];
  return sizes;
}

template <class T>
std::array<std::vector<T>, 3> shuffled_blocks(std::span<const T> xs,
                                              const std::array<double, 3>& ratios,
                                              std::uint64_t seed) {
  std::vector<T> v(xs.begin(), xs.end());
  std::mt19937_64 rng(seed);
  std::shuffle(v.begin(), v.end(), rng);
  const auto sizes = apportion(v.size(), ratios);
  std::array<std::vector<T>, 3> out;
  auto it = v.begin();
  for (int i = 0; i < 3; ++i) {
    out[i].assign(it, it + static_cast<std::ptrdiff_t>(sizes[i]));
    it += static_cast<std::ptrdiff_t>(sizes[i]);
  }
  return out;
}

// Unique item ids referenced by triplets, in first-seen order.
std::vector<ItemId> unique_items(std::span<const TripletIdx> triplets) {
  std::vector<ItemId> out;
  std::unordered_set<ItemId> seen;
  for (const auto& t : triplets) {
    for (ItemId id : {t.anchor_id, t.positive_id, t.negative_id}) {
      if (seen.insert(id).second) out.push_back(id);
    }
  }
  return out;
}

std::size_t input_dim_of(const EncoderParams& params) { return params.input_dim(); }

double squared_norm(const EncoderParams& g) {
  double s = 0.0;
  for (const auto& layer : g.layers) {
    for (double x : layer.values()) s += x * x;
  }
  return s;
}

void add_into(EncoderParams& dst, const EncoderParams& src) {
  for (std::size_t l = 0; l < dst.layers.size(); ++l) {
    auto d = dst.layers[l].values();
    auto s = src.layers[l].values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  }
}

class Adam {
 public:
  Adam(const EncoderParams& shape, const TrainConfig& cfg)
      : cfg_(cfg), m_(shape.zeros_like()), v_(shape.zeros_like()) {}

  void step(EncoderParams& params, const EncoderParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      auto p = params.layers[l].values();
      auto g = grad.layers[l].values();
      auto m = m_.layers[l].values();
      auto v = v_.layers[l].values();
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.adam_beta1 * m[i] + (1.0 - cfg_.adam_beta1) * g[i];
        v[i] = cfg_.adam_beta2 * v[i] + (1.0 - cfg_.adam_beta2) * g[i] * g[i];
        p[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_eps);
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  EncoderParams m_;
  EncoderParams v_;
  std::uint64_t t_ = 0;
};

constexpr std::size_t kChunk = 16;

}  // namespace

BatchGradient batch_gradient(std::span<const TripletIdx> batch, const ItemCatalog& catalog,
                             const EncoderParams& params, const LossParams& loss,
                             std::size_t threads) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "batch has no triplets");
  const auto items = unique_items(batch);
  std::unordered_map<ItemId, std::size_t> slot;
  for (std::size_t i = 0; i < items.size(); ++i) slot.emplace(items[i], i);

  const std::size_t dim = input_dim_of(params);
  std::vector<EncodeResult> fwd(items.size());
  parallel_for(items.size(), threads, [&](std::size_t i) {
    fwd[i] = encoder_forward(encoding_of(catalog.at(items[i]), dim), params);
  });

  BatchGradient out;
  std::vector<std::vector<double>> d_emb(items.size(),
                                         std::vector<double>(params.output_dim(), 0.0));
  for (const auto& t : batch) {
    const std::size_t a = slot.at(t.anchor_id);
    const std::size_t p = slot.at(t.positive_id);
    const std::size_t n = slot.at(t.negative_id);
    const TripletEmbeddings te{fwd[a].embedding, fwd[p].embedding, fwd[n].embedding};
    out.loss += loss_value(te, loss);
    const auto g = loss_gradients(te, loss);
    for (std::size_t d = 0; d < g.anchor.size(); ++d) {
      d_emb[a][d] += g.anchor[d];
      d_emb[p][d] += g.positive[d];
      d_emb[n][d] += g.negative[d];
    }
  }

  const std::size_t n_chunks = (items.size() + kChunk - 1) / kChunk;
  std::vector<EncoderParams> partial(n_chunks);
  parallel_for(n_chunks, threads, [&](std::size_t c) {
    partial[c] = params.zeros_like();
    const std::size_t end = std::min(items.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      encoder_backward(fwd[i].tape, d_emb[i], params, partial[c]);
    }
  });
  out.grad = params.zeros_like();
  for (const auto& g : partial) add_into(out.grad, g);
  return out;
}

DatasetSplit split_dataset(std::span<const std::uint64_t> identities,
                           std::array<double, 3> ratios, std::uint64_t seed) {
  if (identities.size() < 3) {
    throw Error(ErrorCode::TooFewIdentities, "need at least 3 identities, got " +
                                                 std::to_string(identities.size()));
  }
  check_ratios(ratios);
  auto blocks = shuffled_blocks(identities, ratios, seed);
  return {std::move(blocks[0]), std::move(blocks[1]), std::move(blocks[2])};
}

std::string_view to_string(SplitLevel level) noexcept {
  return level == SplitLevel::Identity ? "identity" : "triplet";
}

SplitLevel parse_split_level(std::string_view name) {
  if (name == "identity") return SplitLevel::Identity;
  if (name == "triplet") return SplitLevel::Triplet;
  throw Error(ErrorCode::InvalidArgument, "unknown split level '" + std::string(name) + "'");
}

TripletPartition partition_by_identity(std::span<const TripletIdx> triplets,
                                       const ItemCatalog& catalog,
                                       const DatasetSplit& split) {
  std::unordered_map<std::uint64_t, int> part;
  for (auto id : split.train) part[id] = 0;
  for (auto id : split.validation) part[id] = 1;
  for (auto id : split.test) part[id] = 2;
  auto part_of = [&](ItemId item) {
    auto it = part.find(catalog.at(item).identity_id);
    return it == part.end() ? -1 : it->second;
  };
  TripletPartition out;
  for (const auto& t : triplets) {
    const int pa = part_of(t.anchor_id);
    if (pa < 0 || part_of(t.positive_id) != pa || part_of(t.negative_id) != pa) continue;
    (pa == 0 ? out.train : pa == 1 ? out.validation : out.test).push_back(t);
  }
  return out;
}

TripletPartition partition_by_triplet(std::span<const TripletIdx> triplets,
                                      std::array<double, 3> ratios,
                                      std::uint64_t seed) {
  check_ratios(ratios);
  auto blocks = shuffled_blocks(triplets, ratios, seed);
  return {std::move(blocks[0]), std::move(blocks[1]), std::move(blocks[2])};
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "learning_rate must be non-negative");
  }
  if (patience == 0) throw Error(ErrorCode::InvalidArgument, "patience must be >= 1");
  if (!(grad_clip_norm > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "grad_clip_norm must be positive");
  }
  loss.validate();
}

std::string_view to_string(StopReason reason) noexcept {
  return reason == StopReason::Patience ? "patience" : "max_epochs";
}

double triplet_accuracy(std::span<const TripletIdx> triplets, const ItemCatalog& catalog,
                        const EncoderParams& params, const LossParams& loss,
                        std::size_t threads) {
  if (triplets.empty()) throw Error(ErrorCode::EmptyInput, "no triplets to score");
  const auto items = unique_items(triplets);
  std::unordered_map<ItemId, std::size_t> slot;
  for (std::size_t i = 0; i < items.size(); ++i) slot.emplace(items[i], i);

  const std::size_t dim = input_dim_of(params);
  std::vector<EmbeddingVector> emb(items.size());
  parallel_for(items.size(), threads, [&](std::size_t i) {
    emb[i] = encode(encoding_of(catalog.at(items[i]), dim), params);
    if (loss.normalize_inputs) emb[i] = normalize(emb[i]);
  });

  std::size_t correct = 0;
  for (const auto& t : triplets) {
    const auto& a = emb[slot.at(t.anchor_id)];
    const double dp = euclidean_distance(a, emb[slot.at(t.positive_id)]);
    const double dn = euclidean_distance(a, emb[slot.at(t.negative_id)]);
    if (dp < dn) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(triplets.size());
}

TrainResult train_partitioned(std::span<const TripletIdx> train_triplets,
                              std::span<const TripletIdx> validation_triplets,
                              const ItemCatalog& catalog, const TrainConfig& cfg,
                              const EncoderParams& init, const EpochCallback& on_epoch) {
  cfg.validate();
  init.validate();
  if (train_triplets.empty()) throw Error(ErrorCode::EmptyInput, "no training triplets");
  if (validation_triplets.empty()) {
    throw Error(ErrorCode::EmptyInput, "no validation triplets");
  }

  EncoderParams params = init;
  TrainResult result{init, {}};
  auto& report = result.report;
  report.initial_validation_accuracy =
      triplet_accuracy(validation_triplets, catalog, params, cfg.loss, cfg.threads);
  report.best_validation_accuracy = report.initial_validation_accuracy;

  Adam adam(params, cfg);
  std::vector<std::size_t> order(train_triplets.size());
  std::vector<TripletIdx> batch;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    double norm_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_triplets[order[i]]);

      auto out = batch_gradient(batch, catalog, params, cfg.loss, cfg.threads);
      const double norm = std::sqrt(squared_norm(out.grad));
      if (!std::isfinite(out.loss) || !std::isfinite(norm)) {
        throw Error(ErrorCode::NonFiniteLoss,
                    "epoch " + std::to_string(epoch) + " batch " + std::to_string(n_batches) +
                        ": loss " + std::to_string(out.loss) + ", gradient norm " +
                        std::to_string(norm));
      }
      if (norm > cfg.grad_clip_norm) {
        const double scale = cfg.grad_clip_norm / norm;
        for (auto& layer : out.grad.layers) {
          for (double& g : layer.values()) g *= scale;
        }
      }
      adam.step(params, out.grad);
      loss_sum += out.loss;
      norm_sum += norm;
      ++n_batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_triplets.size());
    rec.grad_norm = norm_sum / static_cast<double>(n_batches);
    rec.validation_accuracy =
        triplet_accuracy(validation_triplets, catalog, params, cfg.loss, cfg.threads);
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.validation_accuracy > report.best_validation_accuracy) {
      report.best_validation_accuracy = rec.validation_accuracy;
      report.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      report.stop_reason = StopReason::Patience;
      return result;
    }
  }
  report.stop_reason = StopReason::MaxEpochs;
  return result;
}

TrainResult train(std::span<const TripletIdx> triplets, const ItemCatalog& catalog,
                  const DatasetSplit& split, const TrainConfig& cfg,
                  const EncoderParams& init, const EpochCallback& on_epoch) {
  const auto parts = partition_by_identity(triplets, catalog, split);
  return train_partitioned(parts.train, parts.validation, catalog, cfg, init, on_epoch);
}

GridSearchResult grid_search_margin(std::span<const double> margins,
                                    std::span<const TripletIdx> train_triplets,
                                    std::span<const TripletIdx> validation_triplets,
                                    const ItemCatalog& catalog, const TrainConfig& cfg,
                                    const EncoderParams& init) {
  if (margins.empty()) throw Error(ErrorCode::EmptyInput, "no margins to search");
  std::vector<double> sorted(margins.begin(), margins.end());
  std::sort(sorted.begin(), sorted.end());

  GridSearchResult out;
  double best_acc = -1.0;
  for (double margin : sorted) {
    TrainConfig run = cfg;
    run.loss.margin = margin;
    auto res = train_partitioned(train_triplets, validation_triplets, catalog, run, init);
    if (res.report.best_validation_accuracy > best_acc) {
      best_acc = res.report.best_validation_accuracy;
      out.best_margin = margin;
      out.best_params = res.params;
    }
    out.runs.push_back({margin, std::move(res.report)});
  }
  return out;
}

}  // namespace fuzzyjoin
