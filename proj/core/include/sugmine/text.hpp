#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace sugmine::text {

std::string_view trim(std::string_view s) noexcept;

/// ASCII lowercase; bytes >= 0x80 pass through untouched.
std::string to_lower(std::string_view s);

/// Number of UTF-8 code points. Throws DataError on malformed UTF-8.
std::size_t utf8_length(std::string_view s);

/// Splits on runs of ASCII whitespace.
std::vector<std::string> split_whitespace(std::string_view s);

/// Lowercase, delete ASCII punctuation, collapse whitespace, then split.
/// This is the normalization shared by ROUGE-L and the span metrics.
std::vector<std::string> normalized_tokens(std::string_view s);

/// normalized_tokens joined by single spaces.
std::string normalize(std::string_view s);

/// Lowercased alphanumeric word tokens (apostrophes kept inside words).
/// Used by the featurizer.
std::vector<std::string> word_tokens(std::string_view s);

bool iequals(std::string_view a, std::string_view b) noexcept;

/// Case-insensitive substring search.
bool icontains(std::string_view haystack, std::string_view needle);

}  // namespace sugmine::text
