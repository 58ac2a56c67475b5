#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace matra {

enum class Language : int { english = 0, hindi, bengali, tamil, kannada };

inline constexpr std::array<Language, 5> kAllLanguages = {
    Language::english, Language::hindi, Language::bengali, Language::tamil, Language::kannada};

inline constexpr std::array<Language, 4> kIndicLanguages = {
    Language::hindi, Language::bengali, Language::tamil, Language::kannada};

/// Closed code-point range of a script block.
struct ScriptRange {
  char32_t first;
  char32_t last;
  constexpr bool contains(char32_t c) const noexcept { return c >= first && c <= last; }
};

constexpr ScriptRange script_range(Language lang) noexcept {
  switch (lang) {
    case Language::english: return {U'A', U'Z'};
    case Language::hindi: return {0x0900, 0x097F};
    case Language::bengali: return {0x0980, 0x09FF};
    case Language::tamil: return {0x0B80, 0x0BFF};
    case Language::kannada: return {0x0C80, 0x0CFF};
  }
  return {0, 0};
}

constexpr bool in_script(Language lang, char32_t c) noexcept { return script_range(lang).contains(c); }

constexpr bool is_indic(Language lang) noexcept { return lang != Language::english; }

/// Lower-case English name: "english", "hindi", ...
std::string_view language_name(Language lang) noexcept;

/// Special token: "<english>", "<hindi>", ...
std::string language_token(Language lang);

std::optional<Language> parse_language(std::string_view name);

std::optional<Language> language_from_token(std::string_view token);

/// Comma-separated list of accepted language names, for error messages.
std::string allowed_language_names();

}  // namespace matra
