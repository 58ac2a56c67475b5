#include "doctest.h"

#include "matra/error.hpp"
#include "matra/vocabulary.hpp"
#include "support.hpp"

using namespace matra;

TEST_CASE("reserved ids") {
  const Vocabulary v;
  REQUIRE(v.size() == 8);
  CHECK(v.token(kPadId) == "<PAD>");
  CHECK(v.token(kEosId) == "<EOS>");
  CHECK(v.token(kUnkId) == "<UNK>");
  CHECK(v.token(language_token_id(Language::english)) == "<english>");
  CHECK(v.token(language_token_id(Language::kannada)) == "<kannada>");
  CHECK(v.find("<hindi>") == language_token_id(Language::hindi));
}

TEST_CASE("characters are sorted by code point after the reserved block") {
  const Vocabulary v = Vocabulary::from_characters({U'ल', U'B', U'A', U'B'});
  REQUIRE(v.size() == 11);
  CHECK(v.character(8) == U'A');
  CHECK(v.character(9) == U'B');
  CHECK(v.character(10) == U'ल');
  CHECK(v.id_of(U'ल') == 10);
  CHECK(v.id_of(U'Z') == kUnkId);
  CHECK(v.is_character(8));
  CHECK_FALSE(v.is_character(kEosId));
}

TEST_CASE("vocabulary rebuilds from its token list") {
  const Vocabulary v = build_vocab(matra::testing::synthetic_corpus());
  CHECK(v.size() == 8 + 4 + 16);
  CHECK(Vocabulary::from_tokens(v.tokens()) == v);

  auto tokens = v.tokens();
  std::swap(tokens[0], tokens[1]);
  CHECK_THROWS_AS(Vocabulary::from_tokens(tokens), DataError);
  tokens = v.tokens();
  std::swap(tokens[8], tokens[9]);
  CHECK_THROWS_AS(Vocabulary::from_tokens(tokens), DataError);
  tokens = v.tokens();
  tokens.push_back("AB");
  CHECK_THROWS_AS(Vocabulary::from_tokens(tokens), DataError);
}

TEST_CASE("encode_example frames both sides with the target language and EOS") {
  const Vocabulary v = Vocabulary::from_characters({U'A', U'B', U'क'});
  const TransliterationTriple t{U"AB", U"क", Language::hindi, Language::english};
  const EncodedExample ex = encode_example(t, v, 16);
  const TokenId hi = language_token_id(Language::hindi);
  CHECK(ex.src_ids == std::vector<TokenId>{hi, 8, 9, kEosId});
  CHECK(ex.tgt_ids == std::vector<TokenId>{hi, 10, kEosId});
  CHECK(ex.unknown_count == 0);
}

TEST_CASE("encode_example length and emptiness checks") {
  const Vocabulary v = Vocabulary::from_characters({U'A'});
  CHECK_NOTHROW(encode_example({U"AA", U"AA", Language::hindi, Language::english}, v, 4));
  CHECK_THROWS_AS(encode_example({U"AAA", U"A", Language::hindi, Language::english}, v, 4), DataError);
  CHECK_THROWS_AS(encode_example({U"", U"A", Language::hindi, Language::english}, v, 4), DataError);
  CHECK_THROWS_AS(encode_example({U"A", U"", Language::hindi, Language::english}, v, 4), DataError);
}

TEST_CASE("unknown characters map to UNK and are counted") {
  const Vocabulary v = Vocabulary::from_characters({U'A'});
  std::size_t unknown = 0;
  const auto ids = encode_source(U"AZA", Language::english, v, &unknown);
  CHECK(ids == std::vector<TokenId>{language_token_id(Language::english), 8, kUnkId, 8, kEosId});
  CHECK(unknown == 1);
  CHECK(v.decode(ids) == U"AA");
}

TEST_CASE("empty corpus has no vocabulary") { CHECK_THROWS_AS(build_vocab(Corpus{}), DataError); }
