#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fuzzyjoin {

enum class EntityKind { Person, Company };

std::string_view to_string(EntityKind kind) noexcept;
EntityKind parse_entity_kind(std::string_view name);

struct RawRecord {
  std::string source_id;
  EntityKind kind = EntityKind::Person;
  std::string main_name;
  std::vector<std::string> aliases;
};

struct EntityRecord {
  std::uint64_t identity_id = 0;
  EntityKind kind = EntityKind::Person;
  /// names[0] is the main name.
  std::vector<std::string> names;

  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

enum class DropRule {
  Royalty,
  EmptyAfterStrip,
  NonLatin1,
  NoSharedPart,
  LastNameMismatch,
  NumericCode,
  NoOverlap,
  Duplicate,
  TooFewForms,
  KindMismatch,
};

std::string_view to_string(DropRule rule) noexcept;

struct Dropped {
  DropRule rule;
};

struct CleansingReport {
  std::map<std::string, std::size_t> records_dropped;
  std::map<std::string, std::size_t> aliases_dropped;
  std::size_t records_in = 0;
  std::size_t entities_out = 0;
};

/// Cleansed record plus the rule that removed each dropped alias.
struct CleanseResult {
  EntityRecord entity;
  std::vector<DropRule> alias_drops;
};

using CleanseOutcome = std::variant<CleanseResult, Dropped>;

std::vector<std::string> default_royalty_titles();

/// Case-preserving name parts: whitespace split with `,` `-` `.` removed.
std::vector<std::string> name_parts(std::string_view name);

/// Family name: the part before the first comma for inverted forms
/// ("Adams, Douglas"), otherwise the final part.
std::string last_name_part(std::string_view name);

/// Removes parenthesized spans, stray parentheses and ellipses, then
/// normalizes whitespace.
std::string strip_qualifiers(std::string_view name);

bool is_roman_numeral_token(std::string_view part, bool follows_name_part);
bool has_royalty_marker(std::string_view name,
                        std::span<const std::string> royalty_titles);

CleanseOutcome cleanse_person(const RawRecord& rec,
                              std::span<const std::string> royalty_titles);
CleanseOutcome cleanse_company(const RawRecord& rec);

/// Candidate characters (case-insensitive, alphanumerics only) appear in order
/// among the initials of the name's parts.
bool is_acronym_of(std::string_view candidate, std::string_view name);

/// Lowercased non-punctuation tokens of a and b intersect.
bool shares_name_part(std::string_view a, std::string_view b);

/// Appends the inverted and initialed variants of a two- or three-part main
/// name, then deduplicates case-insensitively.
EntityRecord augment_person(const EntityRecord& ent);

/// Case-insensitive dedupe keeping first occurrences.
std::vector<std::string> dedupe_names(std::span<const std::string> names);

struct FinalizeResult {
  std::vector<EntityRecord> entities;
  CleansingReport report;
};

FinalizeResult finalize_dataset(std::span<const RawRecord> records,
                                EntityKind kind,
                                std::span<const std::string> royalty_titles);
FinalizeResult finalize_dataset(std::span<const RawRecord> records,
                                EntityKind kind);

// JSON-lines IO.
std::vector<RawRecord> read_raw_records(std::istream& in);
std::vector<EntityRecord> read_entities(std::istream& in);
void write_entities(std::span<const EntityRecord> entities, std::ostream& out);
void write_report(const CleansingReport& report, std::ostream& out);

}  // namespace fuzzyjoin
