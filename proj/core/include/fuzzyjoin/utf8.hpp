#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fuzzyjoin::utf8 {

/// Decodes UTF-8 into code points. Returns nullopt on malformed input.
std::optional<std::u32string> decode(std::string_view s);

std::string encode(std::u32string_view cps);
void append(std::string& out, char32_t cp);

/// Lowercases ASCII and the Latin-1 supplement; other code points pass through.
char32_t lower(char32_t cp) noexcept;
std::string lower(std::string_view s);

/// True when `s` is valid UTF-8 and every code point is in ISO-8859-1.
bool is_latin1(std::string_view s);

bool is_space(char32_t cp) noexcept;

std::string trim(std::string_view s);

/// Collapses runs of whitespace to a single ASCII space and trims the ends.
std::string squeeze_spaces(std::string_view s);

}  // namespace fuzzyjoin::utf8
