#include "matra/corpus.hpp"

#include <expat.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <set>
#include <tuple>

#include "json.hpp"

#include "matra/error.hpp"
#include "matra/utf8.hpp"

namespace matra {

namespace {

constexpr std::string_view kRoot = "TransliterationCorpus";
constexpr std::string_view kName = "Name";
constexpr std::string_view kSourceName = "SourceName";
constexpr std::string_view kTargetName = "TargetName";

std::u32string trim(std::u32string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && utf8::is_space(s[b])) ++b;
  while (e > b && utf8::is_space(s[e - 1])) --e;
  return std::u32string(s.substr(b, e - b));
}

struct NewsHandler {
  XML_Parser parser = nullptr;
  Language source_lang;
  Language target_lang;
  NewsParseOptions options;
  NewsParseResult result;

  std::vector<std::string> stack;
  bool in_name = false;
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::string text;
  bool collecting = false;

  std::string error;
  std::size_t error_line = 0;

  void fail(std::string message) {
    if (error.empty()) {
      error = std::move(message);
      error_line = XML_GetCurrentLineNumber(parser);
    }
    XML_StopParser(parser, XML_FALSE);
  }

  void start(std::string_view name) {
    const std::size_t depth = stack.size();
    stack.emplace_back(name);
    if (depth == 0) {
      if (name != kRoot) fail("root element must be " + std::string(kRoot) + ", found " + std::string(name));
      return;
    }
    if (depth == 1 && name == kName) {
      in_name = true;
      sources.clear();
      targets.clear();
      return;
    }
    if (depth == 2 && in_name && (name == kSourceName || name == kTargetName)) {
      collecting = true;
      text.clear();
      return;
    }
    ++result.unknown_elements;
    if (options.strict) fail("unexpected element <" + std::string(name) + ">");
  }

  void end(std::string_view name) {
    const std::size_t depth = stack.size() - 1;
    stack.pop_back();
    if (depth == 2 && collecting) {
      collecting = false;
      (name == kSourceName ? sources : targets).push_back(text);
      return;
    }
    if (depth == 1 && in_name && name == kName) {
      in_name = false;
      finish_name();
    }
  }

  void finish_name() {
    if (sources.size() != 1 || targets.empty()) {
      if (options.strict) {
        fail("Name entry must have exactly one SourceName and at least one TargetName");
        return;
      }
      ++result.skipped_names;
      return;
    }
    const std::u32string source = trim(utf8::decode(utf8::nfc(sources.front())));
    for (const std::string& t : targets) {
      TransliterationTriple triple;
      triple.source = source;
      triple.target = trim(utf8::decode(utf8::nfc(t)));
      triple.source_lang = source_lang;
      triple.target_lang = target_lang;
      result.triples.push_back(std::move(triple));
    }
  }

  static void on_start(void* self, const XML_Char* name, const XML_Char**) {
    static_cast<NewsHandler*>(self)->start(name);
  }
  static void on_end(void* self, const XML_Char* name) { static_cast<NewsHandler*>(self)->end(name); }
  static void on_text(void* self, const XML_Char* s, int len) {
    auto* h = static_cast<NewsHandler*>(self);
    if (h->collecting) h->text.append(s, static_cast<std::size_t>(len));
  }
};

struct ParserDeleter {
  void operator()(XML_ParserStruct* p) const noexcept { XML_ParserFree(p); }
};

std::string detail_for_removed(std::u32string_view original, Language lang) {
  std::string detail = std::string(language_name(lang)) + " side removed";
  for (char32_t c : original) {
    char32_t upper = (lang == Language::english && c >= U'a' && c <= U'z') ? c - U'a' + U'A' : c;
    if (!in_script(lang, upper)) detail += " " + utf8::describe(c);
  }
  return detail;
}

using TripleKey = std::tuple<std::u32string, std::u32string, int, int>;

TripleKey key_of(const TransliterationTriple& t) {
  return {t.source, t.target, static_cast<int>(t.target_lang), static_cast<int>(t.source_lang)};
}

}  // namespace

NewsParseResult parse_news_xml(std::string_view xml_bytes, Language source_lang, Language target_lang,
                               const NewsParseOptions& options) {
  std::unique_ptr<XML_ParserStruct, ParserDeleter> parser(XML_ParserCreate("UTF-8"));
  if (!parser) throw Error("cannot allocate XML parser");

  NewsHandler handler;
  handler.parser = parser.get();
  handler.source_lang = source_lang;
  handler.target_lang = target_lang;
  handler.options = options;

  XML_SetUserData(parser.get(), &handler);
  XML_SetElementHandler(parser.get(), &NewsHandler::on_start, &NewsHandler::on_end);
  XML_SetCharacterDataHandler(parser.get(), &NewsHandler::on_text);

  const auto status = XML_Parse(parser.get(), xml_bytes.data(), static_cast<int>(xml_bytes.size()), XML_TRUE);
  if (!handler.error.empty()) throw ParseError(handler.error, handler.error_line);
  if (status != XML_STATUS_OK) {
    throw ParseError(std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())),
                     XML_GetCurrentLineNumber(parser.get()));
  }
  return std::move(handler.result);
}

std::u32string filter_to_script(std::u32string_view word, Language lang) {
  std::u32string out;
  out.reserve(word.size());
  for (char32_t c : word) {
    if (lang == Language::english && c >= U'a' && c <= U'z') c = c - U'a' + U'A';
    if (in_script(lang, c)) out.push_back(c);
  }
  return out;
}

CleanResult clean_pairs(std::span<const TransliterationTriple> triples) {
  CleanResult result;
  std::set<TripleKey> seen;

  auto reject = [&](const TransliterationTriple& t, std::string_view rule, std::string detail) {
    result.report.push_back({t.source, t.target, std::string(rule), std::move(detail)});
  };

  for (const TransliterationTriple& t : triples) {
    const auto source_words = utf8::split_words(t.source);
    const auto target_words = utf8::split_words(t.target);
    if (source_words.empty() || target_words.empty()) {
      reject(t, rule::kEmpty, "no words on " + std::string(source_words.empty() ? "source" : "target") + " side");
      continue;
    }
    if (source_words.size() != target_words.size()) {
      reject(t, rule::kWordCount,
             std::to_string(source_words.size()) + " source words vs " + std::to_string(target_words.size()) +
                 " target words");
      continue;
    }

    for (std::size_t w = 0; w < source_words.size(); ++w) {
      TransliterationTriple piece{source_words[w], target_words[w], t.target_lang, t.source_lang};
      std::u32string source = filter_to_script(piece.source, t.source_lang);
      std::u32string target = filter_to_script(piece.target, t.target_lang);

      const bool source_changed = source.size() != piece.source.size();
      const bool target_changed = target.size() != piece.target.size();
      if (source.empty() || target.empty()) {
        reject(piece, rule::kForeignScript,
               detail_for_removed(source.empty() ? piece.source : piece.target,
                                  source.empty() ? t.source_lang : t.target_lang) +
                   "; nothing left");
        continue;
      }
      if (source_changed || target_changed) {
        std::string detail;
        if (source_changed) detail = detail_for_removed(piece.source, t.source_lang);
        if (target_changed) detail += (detail.empty() ? "" : "; ") + detail_for_removed(piece.target, t.target_lang);
        reject(piece, rule::kForeignStripped, std::move(detail));
      }
      piece.source = std::move(source);
      piece.target = std::move(target);

      if (!seen.insert(key_of(piece)).second) {
        reject(piece, rule::kDuplicate, "exact duplicate");
        continue;
      }
      result.kept.push_back(std::move(piece));
    }
  }
  return result;
}

TransliterationTriple reversed(const TransliterationTriple& t) {
  return {t.target, t.source, t.source_lang, t.target_lang};
}

std::vector<TransliterationTriple> reversed(std::span<const TransliterationTriple> triples) {
  std::vector<TransliterationTriple> out;
  out.reserve(triples.size());
  for (const auto& t : triples) out.push_back(reversed(t));
  return out;
}

Corpus tag_and_merge(std::span<const DirectionDataset> datasets) {
  Corpus corpus;
  std::set<TripleKey> seen;
  auto add = [&](TransliterationTriple t) {
    if (seen.insert(key_of(t)).second) corpus.triples.push_back(std::move(t));
  };

  for (const DirectionDataset& ds : datasets) {
    if (ds.source_lang == ds.target_lang)
      throw DataError("dataset " + ds.provenance + " has identical source and target language");
    if (ds.source_lang != Language::english && ds.target_lang != Language::english)
      throw DataError("dataset " + ds.provenance + " pairs " + std::string(language_name(ds.source_lang)) +
                      " with " + std::string(language_name(ds.target_lang)) + "; one side must be english");
    for (const auto& t : ds.triples) {
      if (t.source_lang != ds.source_lang || t.target_lang != ds.target_lang)
        throw DataError("dataset " + ds.provenance + " contains a triple of a different direction");
    }
    for (const auto& t : ds.triples) add(t);
    for (const auto& t : ds.triples) add(reversed(t));
    if (!ds.provenance.empty()) corpus.provenance.push_back(ds.provenance);
  }
  return corpus;
}

CorpusSplit split_corpus(const Corpus& corpus, std::uint64_t seed, SplitRatios ratios) {
  for (auto [name, value] : {std::pair{"train", ratios.train}, {"dev", ratios.dev}, {"test", ratios.test}}) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw ConfigError(std::string("ratios.") + name, "must be >= 0");
  }
  if (std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9)
    throw ConfigError("ratios", "must sum to 1");

  std::map<std::tuple<std::u32string, int, int>, std::size_t> group_index;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.triples.size(); ++i) {
    const auto& t = corpus.triples[i];
    auto key = std::tuple{t.source, static_cast<int>(t.source_lang), static_cast<int>(t.target_lang)};
    auto [it, inserted] = group_index.try_emplace(std::move(key), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  // Fisher-Yates over the raw engine output keeps the order identical across
  // standard library implementations.
  std::mt19937_64 rng(seed);
  for (std::size_t i = groups.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(groups[i - 1], groups[j]);
  }

  const auto n = static_cast<double>(corpus.triples.size());
  const auto train_quota = static_cast<std::size_t>(std::llround(ratios.train * n));
  const auto dev_quota = static_cast<std::size_t>(std::llround(ratios.dev * n));

  std::vector<std::size_t> parts[3];
  for (const auto& group : groups) {
    int part = 2;
    if (parts[0].size() < train_quota) part = 0;
    else if (parts[1].size() < dev_quota) part = 1;
    parts[part].insert(parts[part].end(), group.begin(), group.end());
  }

  CorpusSplit split;
  Corpus* outs[3] = {&split.train, &split.dev, &split.test};
  for (int p = 0; p < 3; ++p) {
    std::sort(parts[p].begin(), parts[p].end());
    for (std::size_t i : parts[p]) outs[p]->triples.push_back(corpus.triples[i]);
    outs[p]->provenance = corpus.provenance;
  }
  return split;
}

std::string to_tsv_line(const TransliterationTriple& t) {
  return utf8::encode(t.source) + '\t' + utf8::encode(t.target) + '\t' + language_token(t.target_lang) + '\t' +
         language_token(t.source_lang);
}

void write_tsv(std::ostream& out, const Corpus& corpus) {
  for (const auto& t : corpus.triples) out << to_tsv_line(t) << '\n';
}

Corpus read_tsv(std::istream& in, std::string provenance) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 4) throw ParseError("expected 4 tab-separated columns, got " + std::to_string(cols.size()), line_no);
    auto target_lang = language_from_token(cols[2]);
    auto source_lang = language_from_token(cols[3]);
    if (!target_lang || !source_lang) throw ParseError("unknown language token", line_no);
    try {
      corpus.triples.push_back({utf8::decode(cols[0]), utf8::decode(cols[1]), *target_lang, *source_lang});
    } catch (const DataError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!provenance.empty()) corpus.provenance.push_back(std::move(provenance));
  return corpus;
}

void write_rejections(std::ostream& out, std::span<const Rejection> report) {
  for (const auto& r : report) {
    nlohmann::ordered_json j;
    j["source"] = utf8::encode(r.source);
    j["target"] = utf8::encode(r.target);
    j["rule"] = r.rule;
    j["detail"] = r.detail;
    out << j.dump() << '\n';
  }
}

}  // namespace matra
