#include "matra/vocabulary.hpp"

#include <algorithm>
#include <set>

#include "matra/error.hpp"
#include "matra/utf8.hpp"

namespace matra {

namespace {

std::vector<std::string> reserved_tokens() {
  std::vector<std::string> tokens = {"<PAD>", "<EOS>", "<UNK>"};
  for (Language lang : kAllLanguages) tokens.push_back(language_token(lang));
  return tokens;
}

}  // namespace

Vocabulary::Vocabulary() {
  tokens_ = reserved_tokens();
  for (std::size_t i = 0; i < tokens_.size(); ++i) token_ids_.emplace(tokens_[i], static_cast<TokenId>(i));
}

Vocabulary Vocabulary::from_characters(std::vector<char32_t> characters) {
  std::sort(characters.begin(), characters.end());
  characters.erase(std::unique(characters.begin(), characters.end()), characters.end());
  Vocabulary vocab;
  for (char32_t c : characters) {
    const auto id = static_cast<TokenId>(vocab.tokens_.size());
    std::string text = utf8::encode(c);
    if (vocab.token_ids_.count(text)) throw DataError("character collides with a reserved token");
    vocab.tokens_.push_back(text);
    vocab.characters_.push_back(c);
    vocab.token_ids_.emplace(std::move(text), id);
    vocab.char_ids_.emplace(c, id);
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  const auto reserved = reserved_tokens();
  if (tokens.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), tokens.begin()))
    throw DataError("vocabulary does not start with the reserved tokens");
  std::vector<char32_t> characters;
  for (std::size_t i = reserved.size(); i < tokens.size(); ++i) {
    auto cps = utf8::decode(tokens[i]);
    if (cps.size() != 1) throw DataError("vocabulary entry " + std::to_string(i) + " is not a single character");
    if (!characters.empty() && cps[0] <= characters.back())
      throw DataError("vocabulary characters are not in strictly increasing code-point order");
    characters.push_back(cps[0]);
  }
  return from_characters(std::move(characters));
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = token_ids_.find(std::string(token));
  if (it == token_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<TokenId> Vocabulary::find(char32_t c) const {
  auto it = char_ids_.find(c);
  if (it == char_ids_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_of(char32_t c) const { return find(c).value_or(kUnkId); }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DataError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

char32_t Vocabulary::character(TokenId id) const {
  if (!is_character(id)) throw DataError("token id " + std::to_string(id) + " is not a character");
  return characters_[static_cast<std::size_t>(id - kFirstCharacterId)];
}

std::u32string Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::u32string out;
  for (TokenId id : ids)
    if (is_character(id)) out.push_back(character(id));
  return out;
}

Vocabulary build_vocab(const Corpus& corpus) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::set<char32_t> chars;
  for (const auto& t : corpus.triples) {
    chars.insert(t.source.begin(), t.source.end());
    chars.insert(t.target.begin(), t.target.end());
  }
  return Vocabulary::from_characters({chars.begin(), chars.end()});
}

std::vector<TokenId> encode_source(std::u32string_view word, Language target_lang, const Vocabulary& vocab,
                                   std::size_t* unknown_count) {
  std::vector<TokenId> ids;
  ids.reserve(word.size() + 2);
  ids.push_back(language_token_id(target_lang));
  for (char32_t c : word) {
    TokenId id = vocab.id_of(c);
    if (id == kUnkId && unknown_count) ++*unknown_count;
    ids.push_back(id);
  }
  ids.push_back(kEosId);
  return ids;
}

EncodedExample encode_example(const TransliterationTriple& triple, const Vocabulary& vocab, std::size_t max_seq_len) {
  if (triple.source.empty() || triple.target.empty())
    throw DataError("empty " + std::string(triple.source.empty() ? "source" : "target") + " word");
  EncodedExample ex;
  ex.src_ids = encode_source(triple.source, triple.target_lang, vocab, &ex.unknown_count);
  ex.tgt_ids = encode_source(triple.target, triple.target_lang, vocab, &ex.unknown_count);
  if (ex.src_ids.size() > max_seq_len || ex.tgt_ids.size() > max_seq_len) {
    throw DataError("encoded length " + std::to_string(std::max(ex.src_ids.size(), ex.tgt_ids.size())) +
                    " exceeds max_seq_len " + std::to_string(max_seq_len) + " for '" + utf8::encode(triple.source) +
                    "'");
  }
  return ex;
}

}  // namespace matra
