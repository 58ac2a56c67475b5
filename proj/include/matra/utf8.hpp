#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace matra::utf8 {

/// Decodes UTF-8 to code points. Throws DataError on invalid sequences.
std::u32string decode(std::string_view bytes);

std::string encode(std::u32string_view text);
std::string encode(char32_t c);

/// Canonical composition (NFC).
std::string nfc(std::string_view bytes);

/// Splits on runs of Unicode white space; empty tokens are never produced.
std::vector<std::u32string> split_words(std::u32string_view text);

bool is_space(char32_t c) noexcept;

/// "U+0041" style rendering for messages.
std::string describe(char32_t c);

}  // namespace matra::utf8
