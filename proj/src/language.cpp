#include "matra/language.hpp"

namespace matra {

std::string_view language_name(Language lang) noexcept {
  switch (lang) {
    case Language::english: return "english";
    case Language::hindi: return "hindi";
    case Language::bengali: return "bengali";
    case Language::tamil: return "tamil";
    case Language::kannada: return "kannada";
  }
  return "unknown";
}

std::string language_token(Language lang) { return "<" + std::string(language_name(lang)) + ">"; }

std::optional<Language> parse_language(std::string_view name) {
  for (Language lang : kAllLanguages)
    if (language_name(lang) == name) return lang;
  return std::nullopt;
}

std::optional<Language> language_from_token(std::string_view token) {
  if (token.size() < 3 || token.front() != '<' || token.back() != '>') return std::nullopt;
  return parse_language(token.substr(1, token.size() - 2));
}

std::string allowed_language_names() {
  std::string out;
  for (Language lang : kAllLanguages) {
    if (!out.empty()) out += ", ";
    out += language_name(lang);
  }
  return out;
}

}  // namespace matra
