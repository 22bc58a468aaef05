#include "fuzzyjoin/data_pipeline.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <regex>
#include <optional>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "fuzzyjoin/error.hpp"
#include "fuzzyjoin/name_encoding.hpp"
#include "fuzzyjoin/utf8.hpp"

namespace fuzzyjoin {

using json = nlohmann::json;

std::string_view to_string(EntityKind kind) noexcept {
  return kind == EntityKind::Person ? "person" : "company";
}

EntityKind parse_entity_kind(std::string_view name) {
  if (name == "person") return EntityKind::Person;
  if (name == "company") return EntityKind::Company;
  throw Error(ErrorCode::InvalidArgument, "unknown entity kind '" + std::string(name) + "'");
}

std::string_view to_string(DropRule rule) noexcept {
  switch (rule) {
    case DropRule::Royalty: return "royalty";
    case DropRule::EmptyAfterStrip: return "empty_after_strip";
    case DropRule::NonLatin1: return "non_latin1";
    case DropRule::NoSharedPart: return "no_shared_part";
    case DropRule::LastNameMismatch: return "last_name_mismatch";
    case DropRule::NumericCode: return "numeric_code";
    case DropRule::NoOverlap: return "no_overlap";
    case DropRule::Duplicate: return "duplicate";
    case DropRule::TooFewForms: return "too_few_forms";
    case DropRule::KindMismatch: return "kind_mismatch";
  }
  return "unknown";
}

std::vector<std::string> default_royalty_titles() {
  return {"king",  "queen",   "pope",    "prince", "princess",
          "emperor", "empress", "tsar", "duke",   "duchess"};
}

namespace {

bool is_name_punct(char32_t cp) { return cp == U',' || cp == U'-' || cp == U'.'; }

bool is_alnum(char32_t cp) {
  if ((cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') ||
      (cp >= U'0' && cp <= U'9')) {
    return true;
  }
  return cp >= 0xC0 && cp <= 0xFF && cp != 0xD7 && cp != 0xF7;
}

std::u32string code_points(std::string_view s) {
  if (auto cps = utf8::decode(s)) return *std::move(cps);
  std::u32string out;
  for (char c : s) out.push_back(static_cast<unsigned char>(c));
  return out;
}

// Whitespace-separated chunks that contain at least one non-punctuation
// character, case preserved.
std::vector<std::string> spaced_parts(std::string_view name) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    const auto cps = code_points(cur);
    if (std::any_of(cps.begin(), cps.end(), [](char32_t c) { return !is_name_punct(c); })) {
      out.push_back(cur);
    }
    cur.clear();
  };
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::string initial_of(std::string_view part) {
  const auto cps = code_points(part);
  std::string out;
  for (char32_t cp : cps) {
    if (!is_name_punct(cp)) {
      utf8::append(out, cp);
      break;
    }
  }
  return out + ".";
}

std::vector<std::string> lowered_parts(std::string_view s) {
  auto parts = name_parts(s);
  for (auto& p : parts) p = utf8::lower(p);
  return parts;
}

bool contains_comma(std::string_view s) { return s.find(',') != std::string_view::npos; }

struct AliasFilterResult {
  std::vector<std::string> names;
  std::vector<DropRule> drops;
};

}  // namespace

std::vector<std::string> name_parts(std::string_view name) {
  std::vector<std::string> out;
  std::u32string cur;
  for (char32_t cp : code_points(name)) {
    if (utf8::is_space(cp) || is_name_punct(cp)) {
      if (!cur.empty()) out.push_back(utf8::encode(cur));
      cur.clear();
    } else {
      cur.push_back(cp);
    }
  }
  if (!cur.empty()) out.push_back(utf8::encode(cur));
  return out;
}

std::string last_name_part(std::string_view name) {
  if (const auto comma = name.find(','); comma != std::string_view::npos) {
    const auto before = name_parts(name.substr(0, comma));
    if (!before.empty()) return before.back();
  }
  const auto parts = name_parts(name);
  return parts.empty() ? std::string() : parts.back();
}

std::string strip_qualifiers(std::string_view name) {
  const auto cps = code_points(name);
  std::u32string kept;
  int depth = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t cp = cps[i];
    if (cp == U'(') {
      ++depth;
      continue;
    }
    if (cp == U')') {
      if (depth > 0) --depth;
      continue;
    }
    if (depth > 0) continue;
    if (cp == 0x2026) continue;  // horizontal ellipsis
    if (cp == U'.' && i + 2 < cps.size() && cps[i + 1] == U'.' && cps[i + 2] == U'.') {
      while (i < cps.size() && cps[i] == U'.') ++i;
      --i;
      continue;
    }
    kept.push_back(cp);
  }
  return utf8::squeeze_spaces(utf8::encode(kept));
}

bool is_roman_numeral_token(std::string_view part, bool follows_name_part) {
  if (part.empty()) return false;
  for (char c : part) {
    if (std::string_view("IVXLCDM").find(c) == std::string_view::npos) return false;
  }
  return part.size() >= 2 || (part == "I" && follows_name_part);
}

bool has_royalty_marker(std::string_view name,
                        std::span<const std::string> royalty_titles) {
  const auto parts = name_parts(name);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto low = utf8::lower(parts[i]);
    if (std::find(royalty_titles.begin(), royalty_titles.end(), low) !=
        royalty_titles.end()) {
      return true;
    }
    if (is_roman_numeral_token(parts[i], i > 0)) return true;
  }
  return false;
}

bool is_acronym_of(std::string_view candidate, std::string_view name) {
  std::u32string letters;
  for (char32_t cp : code_points(candidate)) {
    if (is_alnum(cp)) letters.push_back(utf8::lower(cp));
  }
  if (letters.empty()) return false;
  std::u32string initials;
  for (const auto& part : name_parts(name)) {
    for (char32_t cp : code_points(part)) {
      if (is_alnum(cp)) {
        initials.push_back(utf8::lower(cp));
        break;
      }
    }
  }
  std::size_t j = 0;
  for (char32_t c : initials) {
    if (j < letters.size() && letters[j] == c) ++j;
  }
  return j == letters.size();
}

bool shares_name_part(std::string_view a, std::string_view b) {
  const auto pa = lowered_parts(a);
  const auto pb = lowered_parts(b);
  const std::unordered_set<std::string> sa(pa.begin(), pa.end());
  return std::any_of(pb.begin(), pb.end(), [&](const std::string& p) { return sa.count(p) > 0; });
}

std::vector<std::string> dedupe_names(std::span<const std::string> names) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (seen.insert(utf8::lower(n)).second) out.push_back(n);
  }
  return out;
}

EntityRecord augment_person(const EntityRecord& ent) {
  EntityRecord out = ent;
  if (ent.names.empty()) return out;
  const auto& main = ent.names.front();
  if (contains_comma(main)) return out;
  const auto parts = spaced_parts(main);
  if (parts.size() != 2 && parts.size() != 3) return out;

  const auto& first = parts.front();
  const auto& last = parts.back();
  const auto first_initial = initial_of(first);
  out.names.push_back(last + ", " + first);
  out.names.push_back(first_initial + " " + last);
  out.names.push_back(last + ", " + first_initial);
  if (parts.size() == 3) {
    const auto& middle = parts[1];
    const auto middle_initial = initial_of(middle);
    out.names.push_back(first + " " + middle_initial + " " + last);
    out.names.push_back(last + ", " + first + " " + middle);
    out.names.push_back(last + ", " + first + " " + middle_initial);
  }
  out.names = dedupe_names(out.names);
  return out;
}

namespace {

// Applies the shared strip and Latin-1 rules plus a kind-specific relevance
// test to each alias, then dedupes.
template <class Keep>
AliasFilterResult filter_aliases(const RawRecord& rec, const std::string& main,
                                 std::span<const std::string> royalty_titles,
                                 bool check_royalty, Keep keep) {
  AliasFilterResult res;
  res.names.push_back(main);
  for (const auto& raw : rec.aliases) {
    if (check_royalty && has_royalty_marker(raw, royalty_titles)) {
      res.drops.push_back(DropRule::Royalty);
      continue;
    }
    auto alias = strip_qualifiers(raw);
    if (name_parts(alias).empty()) {
      res.drops.push_back(DropRule::EmptyAfterStrip);
      continue;
    }
    if (!utf8::is_latin1(alias)) {
      res.drops.push_back(DropRule::NonLatin1);
      continue;
    }
    if (auto rule = keep(alias)) {
      res.drops.push_back(*rule);
      continue;
    }
    res.names.push_back(std::move(alias));
  }
  auto deduped = dedupe_names(res.names);
  for (std::size_t i = deduped.size(); i < res.names.size(); ++i) {
    res.drops.push_back(DropRule::Duplicate);
  }
  res.names = std::move(deduped);
  return res;
}

bool is_numeric_code(const std::string& name) {
  static const std::regex pattern("T[0-9]+|[0-9]+");
  return std::regex_match(name, pattern);
}

}  // namespace

CleanseOutcome cleanse_person(const RawRecord& rec,
                              std::span<const std::string> royalty_titles) {
  if (has_royalty_marker(rec.main_name, royalty_titles)) return Dropped{DropRule::Royalty};
  auto main = strip_qualifiers(rec.main_name);
  if (name_parts(main).empty()) return Dropped{DropRule::EmptyAfterStrip};
  if (!utf8::is_latin1(main)) return Dropped{DropRule::NonLatin1};

  const auto main_last = utf8::lower(last_name_part(main));
  auto res = filter_aliases(
      rec, main, royalty_titles, true,
      [&](const std::string& alias) -> std::optional<DropRule> {
        if (!shares_name_part(alias, main)) return DropRule::NoSharedPart;
        if (utf8::lower(last_name_part(alias)) != main_last) {
          return DropRule::LastNameMismatch;
        }
        return std::nullopt;
      });
  CleanseResult out;
  out.entity.kind = EntityKind::Person;
  out.entity.names = std::move(res.names);
  out.alias_drops = std::move(res.drops);
  return out;
}

CleanseOutcome cleanse_company(const RawRecord& rec) {
  auto main = strip_qualifiers(rec.main_name);
  if (name_parts(main).empty()) return Dropped{DropRule::EmptyAfterStrip};
  if (!utf8::is_latin1(main)) return Dropped{DropRule::NonLatin1};
  if (is_numeric_code(main)) return Dropped{DropRule::NumericCode};

  auto res = filter_aliases(
      rec, main, {}, false,
      [&](const std::string& alias) -> std::optional<DropRule> {
        if (is_numeric_code(alias)) return DropRule::NumericCode;
        if (shares_name_part(alias, main) || is_acronym_of(alias, main) ||
            is_acronym_of(main, alias)) {
          return std::nullopt;
        }
        return DropRule::NoOverlap;
      });
  CleanseResult out;
  out.entity.kind = EntityKind::Company;
  out.entity.names = std::move(res.names);
  out.alias_drops = std::move(res.drops);
  return out;
}

FinalizeResult finalize_dataset(std::span<const RawRecord> records,
                                EntityKind kind,
                                std::span<const std::string> royalty_titles) {
  FinalizeResult out;
  out.report.records_in = records.size();
  auto drop_record = [&](DropRule r) { ++out.report.records_dropped[std::string(to_string(r))]; };

  for (const auto& rec : records) {
    if (rec.kind != kind) {
      drop_record(DropRule::KindMismatch);
      continue;
    }
    auto outcome = kind == EntityKind::Person ? cleanse_person(rec, royalty_titles)
                                              : cleanse_company(rec);
    if (const auto* d = std::get_if<Dropped>(&outcome)) {
      drop_record(d->rule);
      continue;
    }
    auto& res = std::get<CleanseResult>(outcome);
    for (DropRule r : res.alias_drops) {
      ++out.report.aliases_dropped[std::string(to_string(r))];
    }
    EntityRecord ent = std::move(res.entity);
    if (kind == EntityKind::Person) ent = augment_person(ent);
    if (ent.names.size() < 2) {
      drop_record(DropRule::TooFewForms);
      continue;
    }
    ent.identity_id = out.entities.size();
    out.entities.push_back(std::move(ent));
  }
  out.report.entities_out = out.entities.size();
  return out;
}

FinalizeResult finalize_dataset(std::span<const RawRecord> records, EntityKind kind) {
  const auto titles = default_royalty_titles();
  return finalize_dataset(records, kind, titles);
}

namespace {

template <class Fn>
void for_each_json_line(std::istream& in, Fn fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (utf8::trim(line).empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::FormatError,
                  "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<RawRecord> read_raw_records(std::istream& in) {
  std::vector<RawRecord> out;
  for_each_json_line(in, [&](const json& j) {
    RawRecord r;
    const auto& sid = j.at("source_id");
    r.source_id = sid.is_string() ? sid.get<std::string>() : sid.dump();
    r.kind = parse_entity_kind(j.at("kind").get<std::string>());
    r.main_name = j.at("main").get<std::string>();
    if (j.contains("aliases")) r.aliases = j.at("aliases").get<std::vector<std::string>>();
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<EntityRecord> read_entities(std::istream& in) {
  std::vector<EntityRecord> out;
  for_each_json_line(in, [&](const json& j) {
    EntityRecord e;
    e.identity_id = j.at("id").get<std::uint64_t>();
    e.kind = parse_entity_kind(j.at("kind").get<std::string>());
    e.names = j.at("names").get<std::vector<std::string>>();
    if (e.names.empty()) throw Error(ErrorCode::FormatError, "entity without names");
    out.push_back(std::move(e));
  });
  return out;
}

void write_entities(std::span<const EntityRecord> entities, std::ostream& out) {
  for (const auto& e : entities) {
    json j{{"id", e.identity_id}, {"kind", to_string(e.kind)}, {"names", e.names}};
    out << j.dump() << '\n';
  }
}

void write_report(const CleansingReport& report, std::ostream& out) {
  json j{{"records_in", report.records_in},
         {"entities_out", report.entities_out},
         {"records_dropped", report.records_dropped},
         {"aliases_dropped", report.aliases_dropped}};
  out << j.dump(2) << '\n';
}

}  // namespace fuzzyjoin
