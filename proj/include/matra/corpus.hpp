#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matra/language.hpp"

namespace matra {

/// One training pair. `target_lang` is the output language and doubles as the
/// language token the example is tagged with.
struct TransliterationTriple {
  std::u32string source;
  std::u32string target;
  Language target_lang = Language::english;
  Language source_lang = Language::english;

  friend bool operator==(const TransliterationTriple&, const TransliterationTriple&) = default;
};

struct Corpus {
  std::vector<TransliterationTriple> triples;
  std::vector<std::string> provenance;

  std::size_t size() const noexcept { return triples.size(); }
  bool empty() const noexcept { return triples.empty(); }
};

// ---------------------------------------------------------------------------
// NEWS XML ingestion
// ---------------------------------------------------------------------------

struct NewsParseOptions {
  /// Fail on unknown elements or a Name without exactly one SourceName.
  bool strict = false;
};

struct NewsParseResult {
  std::vector<TransliterationTriple> triples;
  /// Elements outside TransliterationCorpus/Name/SourceName/TargetName.
  std::size_t unknown_elements = 0;
  /// Name entries skipped in lenient mode (missing SourceName or no TargetName).
  std::size_t skipped_names = 0;
};

/// Parses one NEWS shared-task file. A Name with k TargetName children yields
/// k triples that repeat the source word. Text is NFC-normalized and trimmed
/// but otherwise uncleaned. Throws ParseError carrying the line number.
NewsParseResult parse_news_xml(std::string_view xml_bytes, Language source_lang, Language target_lang,
                               const NewsParseOptions& options = {});

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

namespace rule {
inline constexpr std::string_view kWordCount = "word-count";
inline constexpr std::string_view kEmpty = "empty";
inline constexpr std::string_view kForeignStripped = "foreign-char-stripped";
inline constexpr std::string_view kForeignScript = "foreign-script";
inline constexpr std::string_view kDuplicate = "duplicate";
}  // namespace rule

/// One line of the rejection report. `foreign-char-stripped` entries describe
/// triples that were repaired and kept; every other rule means the triple was dropped.
struct Rejection {
  std::u32string source;
  std::u32string target;
  std::string rule;
  std::string detail;
};

struct CleanResult {
  std::vector<TransliterationTriple> kept;
  std::vector<Rejection> report;
};

/// Applies the cleaning rules in order: whitespace word-count agreement
/// (multi-word pairs with equal counts are split position-wise), Latin
/// upper-casing, removal of characters outside each side's script block
/// (dropping the pair if a side becomes empty), and exact de-duplication.
CleanResult clean_pairs(std::span<const TransliterationTriple> triples);

/// Cleans a single word against a script: upper-cases Latin letters for
/// English and removes everything outside the block.
std::u32string filter_to_script(std::u32string_view word, Language lang);

// ---------------------------------------------------------------------------
// Merge and split
// ---------------------------------------------------------------------------

struct DirectionDataset {
  Language source_lang = Language::english;
  Language target_lang = Language::hindi;
  std::vector<TransliterationTriple> triples;
  std::string provenance;
};

TransliterationTriple reversed(const TransliterationTriple& t);
std::vector<TransliterationTriple> reversed(std::span<const TransliterationTriple> triples);

/// Merges English-paired datasets into one corpus holding both directions of
/// every dataset (as given, then reversed), de-duplicated in first-seen order.
/// Throws DataError for a dataset with no English side.
Corpus tag_and_merge(std::span<const DirectionDataset> datasets);

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  Corpus train;
  Corpus dev;
  Corpus test;
};

inline constexpr std::uint64_t kDefaultSplitSeed = 42;

/// Seeded partition that keeps every triple sharing (source word, direction)
/// in the same part. Throws ConfigError unless ratios are non-negative and sum to 1.
CorpusSplit split_corpus(const Corpus& corpus, std::uint64_t seed = kDefaultSplitSeed, SplitRatios ratios = {});

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// source \t target \t <target_lang> \t <source_lang> \n, no header.
void write_tsv(std::ostream& out, const Corpus& corpus);
std::string to_tsv_line(const TransliterationTriple& t);
Corpus read_tsv(std::istream& in, std::string provenance = {});

/// JSON-lines {source, target, rule, detail}.
void write_rejections(std::ostream& out, std::span<const Rejection> report);

}  // namespace matra
