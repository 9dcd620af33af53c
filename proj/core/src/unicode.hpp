#pragma once

// Internal UTF-8 / code point helpers backed by ICU.

#include <string>
#include <string_view>

namespace fatality::unicode {

// Invalid sequences decode to U+FFFD.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view text);
std::string encode(char32_t c);

// Full lowercase mapping (root locale).
std::u32string to_lower(std::u32string_view text);

// Canonical decomposition (NFD).
std::u32string nfd(std::u32string_view text);

bool is_whitespace(char32_t c);       // space, \t, \n, \r, or category Zs
bool is_control(char32_t c);          // category C*, excluding \t \n \r
bool is_punctuation(char32_t c);      // ASCII symbol ranges or category P*
bool is_combining_mark(char32_t c);   // category Mn
bool is_cjk(char32_t c);              // CJK unified ideograph blocks
bool is_alphanumeric(char32_t c);
bool is_digit(char32_t c);
bool is_any_whitespace(char32_t c);   // Unicode White_Space property

std::size_t count_scalars(std::string_view utf8);

}  // namespace fatality::unicode
