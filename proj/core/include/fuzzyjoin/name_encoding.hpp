#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fuzzyjoin {

/// Lowercased tokens of a name. `-`, `,` and `.` are always standalone tokens.
using TokenSeq = std::vector<std::string>;

inline constexpr std::size_t kDefaultMaxTokens = 10;

struct CharEmbeddingTable {
  std::size_t dim = 0;
  /// Ordered by code point, which is also the on-disk order in model files.
  std::map<char32_t, std::vector<double>> entries;
  std::vector<double> fallback;

  const std::vector<double>& lookup(char32_t cp) const;
  bool contains(char32_t cp) const { return entries.count(cp) != 0; }
};

/// max_tokens x dim matrix, row-major. Rows at or past valid_len are zero.
struct NameEncoding {
  std::size_t max_tokens = 0;
  std::size_t dim = 0;
  std::size_t valid_len = 0;
  std::vector<double> matrix;

  std::span<const double> row(std::size_t i) const {
    return {matrix.data() + i * dim, dim};
  }
};

/// Throws Error(EmptyName) when `name` is blank.
TokenSeq tokenize(std::string_view name);

/// Mean of the token's character vectors; unknown characters use the fallback.
std::vector<double> token_embedding(std::string_view token,
                                    const CharEmbeddingTable& table);

/// Keeps the first `max_tokens` tokens. Throws Error(EmptyName) on an empty
/// sequence.
NameEncoding encode_name(const TokenSeq& tokens,
                         const CharEmbeddingTable& table,
                         std::size_t max_tokens = kDefaultMaxTokens);

/// Parses `<char> <v1> ... <vD>` lines. The fallback vector is all zero.
CharEmbeddingTable load_char_embeddings(std::istream& in);
void save_char_embeddings(const CharEmbeddingTable& table, std::ostream& out);

/// Entries and fallback drawn uniformly from [-0.05, 0.05].
CharEmbeddingTable random_char_embeddings(const std::set<char32_t>& charset,
                                          std::size_t dim, std::uint64_t seed);

/// Code points used by `names` after lowercasing.
std::set<char32_t> charset_of(std::span<const std::string> names);

}  // namespace fuzzyjoin
