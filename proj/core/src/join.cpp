#include "fuzzyjoin/join.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "fuzzyjoin/error.hpp"
#include "fuzzyjoin/parallel.hpp"

namespace fuzzyjoin {

namespace {

constexpr char kMagic[4] = {'E', 'J', 'M', '1'};
constexpr std::uint32_t kMaxHeaderBytes = 1u << 20;

double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

void quantize(std::span<double> xs) {
  for (double& x : xs) x = to_f32(x);
}

std::vector<float> to_floats(std::span<const double> xs) {
  return {xs.begin(), xs.end()};
}

}  // namespace

Model Model::make(CharEmbeddingTable table, EncoderParams encoder, LossParams loss,
                  std::size_t max_tokens) {
  Model m{std::move(table), std::move(encoder), loss, max_tokens};
  quantize(m.table.fallback);
  for (auto& [cp, row] : m.table.entries) quantize(row);
  for (auto& layer : m.encoder.layers) quantize(layer.values());
  m.validate();
  return m;
}

void Model::validate() const {
  encoder.validate();
  if (encoder.layers.empty()) throw Error(ErrorCode::ShapeMismatch, "encoder has no layers");
  if (encoder.input_dim() != table.dim) {
    throw Error(ErrorCode::ShapeMismatch,
                "encoder input dim " + std::to_string(encoder.input_dim()) +
                    " differs from character dim " + std::to_string(table.dim));
  }
  if (max_tokens == 0) throw Error(ErrorCode::ShapeMismatch, "max_tokens must be >= 1");
  loss.validate();
}

void save_model(const Model& model, std::ostream& out) {
  model.validate();
  nlohmann::json header;
  header["char_dim"] = model.table.dim;
  header["max_tokens"] = model.max_tokens;
  std::vector<std::size_t> hidden;
  for (const auto& layer : model.encoder.layers) hidden.push_back(layer.hidden_dim());
  header["layers"] = hidden;
  header["loss"] = {{"kind", std::string(to_string(model.loss.kind))},
                    {"margin", model.loss.margin},
                    {"intra_margin", model.loss.intra_margin},
                    {"lambda", model.loss.lambda},
                    {"angle", model.loss.angle}};
  header["normalize"] = model.loss.normalize_inputs;
  header["char_count"] = model.table.entries.size();
  const std::string text = header.dump();

  detail::BinaryWriter w;
  w.bytes(std::string(kMagic, 4));
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  for (double x : model.table.fallback) w.f32(static_cast<float>(x));
  for (const auto& [cp, row] : model.table.entries) {
    w.u32(static_cast<std::uint32_t>(cp));
    for (double x : row) w.f32(static_cast<float>(x));
  }
  for (const auto& layer : model.encoder.layers) {
    for (double x : layer.values()) w.f32(static_cast<float>(x));
  }
  w.flush_to(out);
}

Model load_model(std::istream& in) {
  detail::BinaryReader r(in);
  if (r.bytes(4) != std::string(kMagic, 4)) {
    throw Error(ErrorCode::FormatError, "not a model file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "model format version " + std::to_string(version) +
                                                " is not supported (expected " +
                                                std::to_string(kModelFormatVersion) + ")");
  }
  const std::uint32_t len = r.u32();
  if (len > kMaxHeaderBytes) throw Error(ErrorCode::FormatError, "model header too large");
  const auto header = nlohmann::json::parse(r.bytes(len), nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw Error(ErrorCode::FormatError, "model header is not valid JSON");
  }

  Model m;
  std::size_t char_count = 0;
  std::vector<std::size_t> hidden;
  try {
    m.table.dim = header.at("char_dim").get<std::size_t>();
    m.max_tokens = header.at("max_tokens").get<std::size_t>();
    hidden = header.at("layers").get<std::vector<std::size_t>>();
    const auto& loss = header.at("loss");
    m.loss.kind = parse_loss_kind(loss.at("kind").get<std::string>());
    m.loss.margin = loss.at("margin").get<double>();
    m.loss.intra_margin = loss.at("intra_margin").get<double>();
    m.loss.lambda = loss.at("lambda").get<double>();
    m.loss.angle = loss.at("angle").get<double>();
    m.loss.normalize_inputs = header.at("normalize").get<bool>();
    char_count = header.at("char_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("model header: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, std::string("model header: ") + e.what());
  }
  if (m.table.dim == 0 || hidden.empty() ||
      std::find(hidden.begin(), hidden.end(), 0) != hidden.end()) {
    throw Error(ErrorCode::FormatError, "model header has zero dimensions");
  }

  m.table.fallback.resize(m.table.dim);
  for (double& x : m.table.fallback) x = r.f32();
  char32_t prev = 0;
  for (std::size_t i = 0; i < char_count; ++i) {
    const auto cp = static_cast<char32_t>(r.u32());
    if (i > 0 && cp <= prev) {
      throw Error(ErrorCode::FormatError, "character rows out of order");
    }
    prev = cp;
    std::vector<double> row(m.table.dim);
    for (double& x : row) x = r.f32();
    m.table.entries.emplace(cp, std::move(row));
  }
  std::size_t in_dim = m.table.dim;
  for (std::size_t h : hidden) {
    GruLayerParams layer(in_dim, h);
    for (double& x : layer.values()) x = r.f32();
    m.encoder.layers.push_back(std::move(layer));
    in_dim = h;
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, e.what());
  }
  return m;
}

EmbeddingVector embed_name(std::string_view name, const Model& model) {
  auto v = encode(encode_name(tokenize(name), model.table, model.max_tokens), model.encoder);
  return model.loss.normalize_inputs ? normalize(v) : v;
}

EmbeddedColumn embed_column(std::span<const std::string> values, const Model& model,
                            std::size_t threads) {
  std::vector<std::optional<EmbeddingVector>> slots(values.size());
  parallel_for(values.size(), threads, [&](std::size_t i) {
    try {
      slots[i] = embed_name(values[i], model);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyName) throw;
    }
  });
  EmbeddedColumn out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.rows.push_back(i);
      out.vectors.push_back(std::move(*slots[i]));
    } else {
      out.skipped.push_back(i);
    }
  }
  return out;
}

std::vector<JoinMatch> join(std::span<const std::string> left,
                            std::span<const std::string> right, const Model& model,
                            const JoinConfig& cfg) {
  if (left.empty() || right.empty()) {
    throw Error(ErrorCode::EmptyColumn, left.empty() ? "left column is empty"
                                                     : "right column is empty");
  }
  const auto l = embed_column(left, model, cfg.threads);
  if (l.rows.empty()) throw Error(ErrorCode::EmptyColumn, "left column has no usable names");
  const auto r = embed_column(right, model, cfg.threads);

  std::vector<IndexedVector> items;
  items.reserve(l.rows.size());
  for (std::size_t i = 0; i < l.rows.size(); ++i) {
    items.push_back({static_cast<ItemId>(l.rows[i]), to_floats(l.vectors[i])});
  }
  const auto forest = build_forest(items, cfg.n_trees, cfg.leaf_size, cfg.seed, cfg.threads);

  QueryConfig q;
  q.k = cfg.k;
  q.search_budget = cfg.search_budget;
  std::vector<NeighborList> hits(r.rows.size());
  parallel_for(r.rows.size(), cfg.threads, [&](std::size_t i) {
    hits[i] = forest.query(std::span<const double>(r.vectors[i]), q);
  });

  std::vector<JoinMatch> out;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    for (std::size_t rank = 0; rank < hits[i].size(); ++rank) {
      out.push_back({right[r.rows[i]], left[hits[i][rank].id], hits[i][rank].distance,
                     rank + 1});
    }
  }
  return out;
}

EvalReport evaluate_vectors(std::span<const IndexedVector> items,
                            const std::unordered_map<ItemId, std::uint64_t>& identity_of,
                            const EvalConfig& cfg) {
  if (items.empty()) throw Error(ErrorCode::EmptyInput, "nothing to evaluate");
  const auto forest = build_forest(items, cfg.n_trees, cfg.leaf_size, cfg.seed, cfg.threads);
  const auto nbrs = self_excluded_neighborhoods(forest, cfg.k, cfg.search_budget, cfg.threads);
  std::vector<ItemId> anchors(forest.size());
  for (std::size_t pos = 0; pos < forest.size(); ++pos) anchors[pos] = forest.id_at(pos);
  return retrieval_metrics(anchors, identity_of, nbrs, cfg.k);
}

EvalReport evaluate(std::span<const EntityRecord> entities, const Model& model,
                    const EvalConfig& cfg) {
  std::vector<std::string> names;
  std::vector<std::uint64_t> identities;
  for (const auto& e : entities) {
    for (const auto& n : e.names) {
      names.push_back(n);
      identities.push_back(e.identity_id);
    }
  }
  if (names.empty()) throw Error(ErrorCode::EmptyInput, "no surface forms to evaluate");
  const auto col = embed_column(names, model, cfg.threads);

  std::vector<IndexedVector> items;
  std::unordered_map<ItemId, std::uint64_t> identity_of;
  for (std::size_t i = 0; i < col.rows.size(); ++i) {
    const auto id = static_cast<ItemId>(col.rows[i]);
    items.push_back({id, to_floats(col.vectors[i])});
    identity_of.emplace(id, identities[col.rows[i]]);
  }
  return evaluate_vectors(items, identity_of, cfg);
}

}  // namespace fuzzyjoin
