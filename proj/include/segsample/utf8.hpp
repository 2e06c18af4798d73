#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace segsample {

// Word-boundary marker carried by the first piece of every word.
inline constexpr char32_t kMarker = U'▁';

namespace utf8 {

// Decodes UTF-8 into Unicode scalar values. Returns std::nullopt on any
// ill-formed sequence (overlong forms, surrogates, values > U+10FFFF).
std::optional<std::u32string> decode(std::string_view bytes);

// Like decode() but throws std::invalid_argument on ill-formed input.
std::u32string decode_or_throw(std::string_view bytes);

std::string encode(std::u32string_view text);
std::string encode(char32_t c);

bool is_space(char32_t c);

// Unicode simple lowercase mapping.
char32_t to_lower(char32_t c);

}  // namespace utf8
}  // namespace segsample
