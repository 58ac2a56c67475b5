#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "matra/corpus.hpp"
#include "matra/language.hpp"

namespace matra {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kEosId = 1;
inline constexpr TokenId kUnkId = 2;
inline constexpr TokenId kFirstLanguageId = 3;
inline constexpr TokenId kFirstCharacterId = 8;

constexpr TokenId language_token_id(Language lang) noexcept {
  return kFirstLanguageId + static_cast<TokenId>(lang);
}

/// Bijection between tokens and ids. Ids 0..7 are reserved for
/// <PAD>, <EOS>, <UNK> and the five language tokens; every other id is a
/// single code point, assigned in code-point order.
class Vocabulary {
 public:
  /// Reserved tokens only.
  Vocabulary();

  static Vocabulary from_characters(std::vector<char32_t> characters);

  /// Reconstructs from the id-ordered token list stored in checkpoints.
  /// Throws DataError if the reserved prefix or the bijection is broken.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t size() const noexcept { return tokens_.size(); }

  std::optional<TokenId> find(std::string_view token) const;
  std::optional<TokenId> find(char32_t c) const;

  /// Id of `c`, or <UNK>.
  TokenId id_of(char32_t c) const;

  /// UTF-8 token text. Throws DataError when out of range.
  const std::string& token(TokenId id) const;

  bool is_character(TokenId id) const noexcept { return id >= kFirstCharacterId && id < static_cast<TokenId>(size()); }
  char32_t character(TokenId id) const;

  /// Characters of `ids`, skipping reserved tokens.
  std::u32string decode(const std::vector<TokenId>& ids) const;

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<char32_t> characters_;  // parallel to tokens_ from kFirstCharacterId
  std::unordered_map<std::string, TokenId> token_ids_;
  std::unordered_map<char32_t, TokenId> char_ids_;
};

/// Reserved tokens plus every distinct character in any source or target.
/// Throws DataError on an empty corpus.
Vocabulary build_vocab(const Corpus& corpus);

struct EncodedExample {
  std::vector<TokenId> src_ids;
  std::vector<TokenId> tgt_ids;
  std::size_t unknown_count = 0;
};

/// [<target lang>, source chars..., <EOS>] and [<target lang>, target chars..., <EOS>].
/// Throws DataError when either side is empty or exceeds `max_seq_len`.
EncodedExample encode_example(const TransliterationTriple& triple, const Vocabulary& vocab, std::size_t max_seq_len);

/// Encoder input for inference: [<target lang>, chars..., <EOS>].
std::vector<TokenId> encode_source(std::u32string_view word, Language target_lang, const Vocabulary& vocab,
                                   std::size_t* unknown_count = nullptr);

}  // namespace matra
