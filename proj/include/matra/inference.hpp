#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matra/checkpoint.hpp"
#include "matra/language.hpp"
#include "matra/model.hpp"
#include "matra/vocabulary.hpp"

namespace matra {

/// Greedy autoregressive decoding seeded with the target-language token.
/// Appends the argmax token (lowest id on ties) until <EOS> or `max_len`
/// tokens; the language token and <EOS> are not part of the result.
/// `max_len` is clamped to what the positional table allows.
std::vector<TokenId> greedy_decode(const ModelParams& params, std::span<const TokenId> src_ids, Language target_lang,
                                   std::size_t max_len);

std::vector<TokenId> greedy_decode(const Checkpoint& ckpt, std::span<const TokenId> src_ids, Language target_lang,
                                   std::size_t max_len);

/// Decodes one already-normalized word without validating its script.
std::u32string decode_word(const Checkpoint& ckpt, std::u32string_view word, Language target_lang);

struct WordResult {
  std::string input;
  std::string output;
  /// English pivot form; set only for Indic-to-Indic requests.
  std::optional<std::string> intermediate;
  /// Decoded token count of each pass (one or two entries).
  std::vector<std::size_t> decode_lengths;
  /// Output characters outside the target script block.
  std::vector<char32_t> out_of_script;
  /// Input characters missing from the vocabulary (encoded as <UNK>).
  std::size_t unknown_characters = 0;
};

struct TransliterationResult {
  std::string output;
  std::vector<WordResult> words;

  bool has_intermediate() const noexcept;
  bool flagged() const noexcept;
};

struct TransliterationRequest {
  std::string text;
  Language source_lang = Language::english;
  Language target_lang = Language::hindi;
};

/// Canonical form of user input for `lang`: NFC, with Latin upper-cased for English.
std::u32string normalize_input(std::string_view text, Language lang);

/// Single word. English endpoints take one pass; Indic-to-Indic pivots
/// through English with the same model. Throws ScriptError naming the first
/// character outside the source script, DataError for empty or multi-word
/// input or identical languages.
TransliterationResult transliterate_word(const Checkpoint& ckpt, std::string_view word, Language source_lang,
                                         Language target_lang);

/// Whitespace-separated words transliterated independently and rejoined with
/// single spaces; the word count is preserved. Errors name the word index.
TransliterationResult transliterate_text(const Checkpoint& ckpt, const TransliterationRequest& request);

}  // namespace matra
