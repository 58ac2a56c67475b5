#include "doctest.h"

#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "matra/corpus.hpp"
#include "matra/error.hpp"
#include "matra/utf8.hpp"
#include "support.hpp"

using namespace matra;
using matra::testing::kNewsEnHi;

namespace {

TransliterationTriple en_hi(std::u32string src, std::u32string tgt) {
  return {std::move(src), std::move(tgt), Language::hindi, Language::english};
}

}  // namespace

TEST_CASE("NEWS parse expands every TargetName") {
  const auto parsed = parse_news_xml(kNewsEnHi, Language::english, Language::hindi);
  REQUIRE(parsed.triples.size() == 6);
  CHECK(parsed.triples[0] == en_hi(U"LEAGUE", U"लीग"));
  CHECK(parsed.triples[1] == en_hi(U"AARTI", U"आरती"));
  CHECK(parsed.triples[2] == en_hi(U"AARTI", U"आरथी"));
  CHECK(parsed.triples[3] == en_hi(U"NEW DELHI", U"नईदिल्ली"));
  CHECK(parsed.triples[4] == en_hi(U"RAM KUMAR", U"राम कुमार"));
  CHECK(parsed.triples[5] == en_hi(U"Rahul", U"राहुल"));
  CHECK(parsed.unknown_elements == 0);
  CHECK(parsed.skipped_names == 0);
}

TEST_CASE("NEWS parse trims and NFC-normalizes text") {
  const std::string xml = "<TransliterationCorpus><Name><SourceName>  KO \n</SourceName><TargetName>" +
                          utf8::encode(U"কো") + "</TargetName></Name></TransliterationCorpus>";
  const auto parsed = parse_news_xml(xml, Language::english, Language::bengali);
  REQUIRE(parsed.triples.size() == 1);
  CHECK(parsed.triples[0].source == U"KO");
  CHECK(parsed.triples[0].target == U"কো");
}

TEST_CASE("NEWS parse errors carry line numbers") {
  const std::string_view broken = "<TransliterationCorpus>\n<Name>\n<SourceName>A</TargetName>\n</Name>\n";
  try {
    parse_news_xml(broken, Language::english, Language::hindi);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_news_xml("<Other/>", Language::english, Language::hindi), ParseError);
  CHECK_THROWS_AS(parse_news_xml("", Language::english, Language::hindi), ParseError);
}

TEST_CASE("lenient and strict handling of unexpected structure") {
  const std::string_view xml = R"(<TransliterationCorpus>
<Comment>x</Comment>
<Name><SourceName>A</SourceName></Name>
<Name><SourceName>B</SourceName><TargetName>ब</TargetName></Name>
</TransliterationCorpus>)";
  const auto lenient = parse_news_xml(xml, Language::english, Language::hindi);
  CHECK(lenient.unknown_elements == 1);
  CHECK(lenient.skipped_names == 1);
  CHECK(lenient.triples.size() == 1);

  try {
    parse_news_xml(xml, Language::english, Language::hindi, {true});
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("cleaning rules") {
  const std::vector<TransliterationTriple> raw = {
      en_hi(U"LEAGUE", U"लीग"),
      en_hi(U"NEW DELHI", U"नईदिल्ली"),
      en_hi(U"RAM KUMAR", U"राम कुमार"),
      en_hi(U"rahul", U"राहुल"),
      en_hi(U"O'BRIEN", U"ओब्रायन"),
      en_hi(U"123", U"लीग"),
      en_hi(U"LEAGUE", U"लीग"),
      en_hi(U"  ", U"लीग"),
  };
  const CleanResult r = clean_pairs(raw);
  REQUIRE(r.kept.size() == 5);
  CHECK(r.kept[0] == en_hi(U"LEAGUE", U"लीग"));
  CHECK(r.kept[1] == en_hi(U"RAM", U"राम"));
  CHECK(r.kept[2] == en_hi(U"KUMAR", U"कुमार"));
  CHECK(r.kept[3] == en_hi(U"RAHUL", U"राहुल"));
  CHECK(r.kept[4] == en_hi(U"OBRIEN", U"ओब्रायन"));

  std::vector<std::string> rules;
  for (const auto& rej : r.report) rules.push_back(rej.rule);
  CHECK(rules == std::vector<std::string>{"word-count", "foreign-char-stripped", "foreign-script", "duplicate", "empty"});
  CHECK(r.report[1].detail.find("U+0027") != std::string::npos);
}

TEST_CASE("filter_to_script") {
  CHECK(filter_to_script(U"Rahul-2", Language::english) == U"RAHUL");
  CHECK(filter_to_script(U"লীগক", Language::hindi) == U"");
  CHECK(filter_to_script(U"ரா.மா", Language::tamil) == U"ராமா");
}

TEST_CASE("tag_and_merge emits both directions without duplicates") {
  DirectionDataset hi{Language::english, Language::hindi, {en_hi(U"LEAGUE", U"लीग"), en_hi(U"RAM", U"राम")}, "a"};
  DirectionDataset hi_again{Language::english, Language::hindi, {en_hi(U"LEAGUE", U"लीग")}, "b"};
  const std::vector<DirectionDataset> sets = {hi, hi_again};
  const Corpus c = tag_and_merge(sets);
  REQUIRE(c.size() == 4);
  CHECK(c.triples[2] == TransliterationTriple{U"लीग", U"LEAGUE", Language::english, Language::hindi});
  CHECK(c.provenance == std::vector<std::string>{"a", "b"});
}

TEST_CASE("tag_and_merge requires an English side") {
  std::vector<DirectionDataset> bad = {{Language::hindi, Language::tamil, {}, "x"}};
  CHECK_THROWS_AS(tag_and_merge(bad), DataError);
  bad = {{Language::english, Language::english, {}, "x"}};
  CHECK_THROWS_AS(tag_and_merge(bad), DataError);
}

TEST_CASE("TSV format is byte exact and round trips") {
  const auto parsed = parse_news_xml(kNewsEnHi, Language::english, Language::hindi);
  const auto cleaned = clean_pairs(parsed.triples);
  const std::vector<DirectionDataset> sets = {{Language::english, Language::hindi, cleaned.kept, "EnHi"}};
  const Corpus merged = tag_and_merge(sets);
  std::ostringstream out;
  write_tsv(out, merged);
  CHECK(out.str() == matra::testing::kNewsEnHiMergedTsv);

  std::istringstream in(out.str());
  const Corpus back = read_tsv(in);
  CHECK(back.triples == merged.triples);
}

TEST_CASE("read_tsv reports the offending line") {
  std::istringstream in("A\tअ\t<hindi>\t<english>\nB\tब\t<french>\t<english>\n");
  try {
    read_tsv(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream short_line("A\tअ\n");
  CHECK_THROWS_AS(read_tsv(short_line), ParseError);
}

TEST_CASE("rejection report is JSON lines") {
  const std::vector<Rejection> report = {{U"NEW DELHI", U"नईदिल्ली", "word-count", "2 source words vs 1 target words"}};
  std::ostringstream out;
  write_rejections(out, report);
  const auto j = nlohmann::json::parse(out.str());
  CHECK(j["source"] == "NEW DELHI");
  CHECK(j["rule"] == "word-count");
  CHECK(out.str().back() == '\n');
}

TEST_CASE("split keeps groups together and is deterministic") {
  Corpus c = matra::testing::synthetic_corpus();
  // A second target for every English source makes multi-triple groups.
  for (const auto& w : matra::testing::synthetic_words())
    c.triples.push_back({w, matra::testing::spell(w, Language::hindi) + U"ा", Language::hindi, Language::english});

  const CorpusSplit a = split_corpus(c, 42);
  const CorpusSplit b = split_corpus(c, 42);
  CHECK(a.train.triples == b.train.triples);
  CHECK(a.dev.triples == b.dev.triples);
  CHECK(a.test.triples == b.test.triples);
  CHECK(a.train.size() + a.dev.size() + a.test.size() == c.size());

  auto groups_of = [](const Corpus& part) {
    std::set<std::tuple<std::u32string, Language, Language>> g;
    for (const auto& t : part.triples) g.insert({t.source, t.source_lang, t.target_lang});
    return g;
  };
  const auto gt = groups_of(a.train), gd = groups_of(a.dev), gs = groups_of(a.test);
  for (const auto& g : gt) {
    CHECK(gd.count(g) == 0);
    CHECK(gs.count(g) == 0);
  }
  for (const auto& g : gd) CHECK(gs.count(g) == 0);

  const CorpusSplit other = split_corpus(c, 43);
  CHECK(other.train.triples != a.train.triples);
}

TEST_CASE("split ratios are validated") {
  const Corpus c = matra::testing::synthetic_corpus();
  CHECK_THROWS_AS(split_corpus(c, 1, {0.5, 0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(split_corpus(c, 1, {1.2, -0.1, -0.1}), ConfigError);
  const CorpusSplit all = split_corpus(c, 1, {1.0, 0.0, 0.0});
  CHECK(all.train.size() == c.size());
  CHECK(all.dev.empty());
}
