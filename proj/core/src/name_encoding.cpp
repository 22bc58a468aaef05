#include "fuzzyjoin/name_encoding.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <random>

#include "fuzzyjoin/error.hpp"
#include "fuzzyjoin/utf8.hpp"

namespace fuzzyjoin {

namespace {

bool is_detached(char32_t cp) { return cp == U'-' || cp == U',' || cp == U'.'; }

std::u32string code_points(std::string_view s) {
  if (auto cps = utf8::decode(s)) return *std::move(cps);
  // Not UTF-8: read the bytes as Latin-1.
  std::u32string out;
  for (char c : s) out.push_back(static_cast<unsigned char>(c));
  return out;
}

}  // namespace

const std::vector<double>& CharEmbeddingTable::lookup(char32_t cp) const {
  auto it = entries.find(cp);
  return it == entries.end() ? fallback : it->second;
}

TokenSeq tokenize(std::string_view name) {
  TokenSeq tokens;
  std::u32string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(utf8::encode(current));
    current.clear();
  };
  for (char32_t cp : code_points(name)) {
    if (utf8::is_space(cp)) {
      flush();
    } else if (is_detached(cp)) {
      flush();
      tokens.push_back(std::string(1, static_cast<char>(cp)));
    } else {
      current.push_back(utf8::lower(cp));
    }
  }
  flush();
  if (tokens.empty()) throw Error(ErrorCode::EmptyName, "name is blank");
  return tokens;
}

std::vector<double> token_embedding(std::string_view token,
                                    const CharEmbeddingTable& table) {
  std::vector<double> out(table.dim, 0.0);
  const auto cps = code_points(token);
  if (cps.empty()) return out;
  for (char32_t cp : cps) {
    const auto& v = table.lookup(cp);
    for (std::size_t d = 0; d < table.dim; ++d) out[d] += v[d];
  }
  const double n = static_cast<double>(cps.size());
  for (double& x : out) x /= n;
  return out;
}

NameEncoding encode_name(const TokenSeq& tokens,
                         const CharEmbeddingTable& table,
                         std::size_t max_tokens) {
  if (tokens.empty()) throw Error(ErrorCode::EmptyName, "no tokens to encode");
  NameEncoding enc;
  enc.max_tokens = max_tokens;
  enc.dim = table.dim;
  enc.valid_len = std::min(tokens.size(), max_tokens);
  enc.matrix.assign(max_tokens * table.dim, 0.0);
  for (std::size_t t = 0; t < enc.valid_len; ++t) {
    const auto v = token_embedding(tokens[t], table);
    std::copy(v.begin(), v.end(), enc.matrix.begin() + t * table.dim);
  }
  return enc;
}

CharEmbeddingTable load_char_embeddings(std::istream& in) {
  CharEmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    // First code point is the character itself; it may be a space.
    std::size_t width = 1;
    const auto lead = static_cast<unsigned char>(line[0]);
    if (lead >= 0xF0) {
      width = 4;
    } else if (lead >= 0xE0) {
      width = 3;
    } else if (lead >= 0xC0) {
      width = 2;
    }
    const auto key = width <= line.size()
                         ? utf8::decode(std::string_view(line).substr(0, width))
                         : std::nullopt;
    if (!key || key->size() != 1 || line.size() <= width ||
        line[width] != ' ') {
      throw Error(ErrorCode::FormatError,
                  "line " + std::to_string(line_no) + ": bad character key");
    }

    std::vector<double> values;
    const char* p = line.data() + width;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      double v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t')) {
        throw Error(ErrorCode::FormatError,
                    "line " + std::to_string(line_no) + ": non-numeric field");
      }
      values.push_back(v);
      p = next;
    }
    if (values.empty()) {
      throw Error(ErrorCode::FormatError,
                  "line " + std::to_string(line_no) + ": no values");
    }
    if (table.dim == 0) {
      table.dim = values.size();
    } else if (values.size() != table.dim) {
      throw Error(ErrorCode::FormatError,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.dim) + " values, got " +
                      std::to_string(values.size()));
    }
    if (!table.entries.emplace((*key)[0], std::move(values)).second) {
      throw Error(ErrorCode::FormatError,
                  "line " + std::to_string(line_no) + ": duplicate character");
    }
  }
  if (table.entries.empty()) {
    throw Error(ErrorCode::EmptySource, "no character embeddings found");
  }
  table.fallback.assign(table.dim, 0.0);
  return table;
}

void save_char_embeddings(const CharEmbeddingTable& table, std::ostream& out) {
  const auto old_precision = out.precision(17);
  for (const auto& [cp, v] : table.entries) {
    std::string key;
    utf8::append(key, cp);
    out << key;
    for (double x : v) out << ' ' << x;
    out << '\n';
  }
  out.precision(old_precision);
}

CharEmbeddingTable random_char_embeddings(const std::set<char32_t>& charset,
                                          std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorCode::InvalidArgument, "dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-0.05, 0.05);
  CharEmbeddingTable table;
  table.dim = dim;
  table.fallback.resize(dim);
  for (double& x : table.fallback) x = uni(rng);
  for (char32_t cp : charset) {
    std::vector<double> v(dim);
    for (double& x : v) x = uni(rng);
    table.entries.emplace(cp, std::move(v));
  }
  return table;
}

std::set<char32_t> charset_of(std::span<const std::string> names) {
  std::set<char32_t> out;
  for (const auto& name : names) {
    for (char32_t cp : code_points(name)) {
      if (!utf8::is_space(cp)) out.insert(utf8::lower(cp));
    }
  }
  return out;
}

}  // namespace fuzzyjoin
