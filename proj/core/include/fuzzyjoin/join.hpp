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
#include "fuzzyjoin/encoder.hpp"
#include "fuzzyjoin/losses.hpp"
#include "fuzzyjoin/metrics.hpp"
#include "fuzzyjoin/name_encoding.hpp"

namespace fuzzyjoin {

/// A trained name embedder: character table, GRU stack and the loss it was
/// trained with (which fixes the normalization policy).
struct Model {
  CharEmbeddingTable table;
  EncoderParams encoder;
  LossParams loss;
  std::size_t max_tokens = kDefaultMaxTokens;

  /// Rounds every weight and table entry to float32, the on-disk precision.
  static Model make(CharEmbeddingTable table, EncoderParams encoder, LossParams loss,
                    std::size_t max_tokens = kDefaultMaxTokens);

  /// Throws Error(ShapeMismatch) if table and encoder disagree.
  void validate() const;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Little-endian binary, magic "EJM1". See README for the layout.
void save_model(const Model& model, std::ostream& out);
/// Throws Error(FormatError) or Error(VersionMismatch).
Model load_model(std::istream& in);

/// Encoder output for one name, normalized when the model's loss is.
EmbeddingVector embed_name(std::string_view name, const Model& model);

struct EmbeddedColumn {
  /// Input row of each vector.
  std::vector<std::size_t> rows;
  std::vector<EmbeddingVector> vectors;
  /// Rows skipped because they hold no tokens.
  std::vector<std::size_t> skipped;
};

EmbeddedColumn embed_column(std::span<const std::string> values, const Model& model,
                            std::size_t threads = 1);

struct JoinMatch {
  std::string right_value;
  std::string left_value;
  double distance = 0.0;
  std::size_t rank = 0;  // 1-based

  friend bool operator==(const JoinMatch&, const JoinMatch&) = default;
};

struct JoinConfig {
  std::size_t k = 1;
  std::size_t n_trees = kDefaultTrees;
  std::size_t leaf_size = kDefaultLeafSize;
  std::uint64_t seed = 0;
  std::optional<std::size_t> search_budget;
  std::size_t threads = 1;
};

/// Indexes the left column and emits the top-k left rows for every right
/// row, grouped by right row in input order. Throws Error(EmptyColumn).
std::vector<JoinMatch> join(std::span<const std::string> left,
                            std::span<const std::string> right, const Model& model,
                            const JoinConfig& cfg);

struct EvalConfig {
  std::size_t k = 20;
  std::size_t n_trees = kDefaultTrees;
  std::size_t leaf_size = kDefaultLeafSize;
  std::uint64_t seed = 0;
  std::optional<std::size_t> search_budget;
  std::size_t threads = 1;
};

/// Retrieval metrics of arbitrary labelled vectors: every vector is an anchor
/// queried against all others. Throws Error(EmptyInput).
EvalReport evaluate_vectors(std::span<const IndexedVector> items,
                            const std::unordered_map<ItemId, std::uint64_t>& identity_of,
                            const EvalConfig& cfg);

/// Embeds every surface form (item ids assigned as in ItemCatalog) and
/// scores the neighborhoods. Throws Error(EmptyInput).
EvalReport evaluate(std::span<const EntityRecord> entities, const Model& model,
                    const EvalConfig& cfg);

}  // namespace fuzzyjoin
