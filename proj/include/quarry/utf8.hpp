#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

// UTF-8 helpers. All character offsets in the project count Unicode scalar
// values, never bytes.
namespace quarry::utf8 {

/// Decodes a whole string; nullopt on malformed input (overlongs,
/// surrogates and truncated sequences included).
std::optional<std::u32string> decode(std::string_view bytes);

bool is_valid(std::string_view bytes);

void append(std::string& out, char32_t cp);
std::string encode(std::u32string_view text);

/// Number of scalar values. Input must be valid UTF-8.
std::size_t length(std::string_view bytes);

/// Substring by scalar-value offsets [start, end). Offsets are clamped.
std::string slice(std::string_view bytes, std::size_t start, std::size_t end);

char32_t to_lower(char32_t cp) noexcept;

/// Letters and digits (ASCII alphanumerics plus non-ASCII characters outside
/// the common punctuation, symbol and whitespace blocks).
bool is_word_char(char32_t cp) noexcept;

}  // namespace quarry::utf8
