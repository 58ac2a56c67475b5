#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "matra/language.hpp"

namespace matra {

/// Exact-match fraction. Throws DataError on length mismatch or empty input.
double top1_accuracy(std::span<const std::u32string> predictions, std::span<const std::u32string> references);

// ---------------------------------------------------------------------------
// Character error rate

/// Counts of one minimal alignment turning a prediction into the truth.
struct EditOps {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t correct = 0;
  /// Length of the truth.
  std::size_t truth_length = 0;

  std::size_t distance() const noexcept { return substitutions + deletions + insertions; }
  friend bool operator==(const EditOps&, const EditOps&) = default;
};

/// Unit-cost Levenshtein alignment over code points. Among minimal
/// alignments the backtrace prefers a match, then a substitution, then a
/// deletion, then an insertion.
EditOps edit_ops(std::u32string_view prediction, std::u32string_view truth);

/// (S + D + I) / N; may exceed 1. Throws DataError when N = 0.
double vanilla_cer(const EditOps& ops);
/// (S + D + I) / (S + D + I + C), always in [0, 1]. Throws DataError when the
/// denominator is 0.
double normalized_cer(const EditOps& ops);

struct CerPair {
  double vanilla = 0.0;
  double normalized = 0.0;
};

CerPair cer(const EditOps& ops);

// ---------------------------------------------------------------------------
// Character-level BLEU

inline constexpr std::size_t kMaxBleuOrder = 4;

struct BleuReport {
  std::size_t max_n = kMaxBleuOrder;
  /// Clipped n-gram precision p_n, index n - 1.
  std::array<double, kMaxBleuOrder> precision{};
  double brevity_penalty = 0.0;
  /// BP * p_n.
  std::array<double, kMaxBleuOrder> individual{};
  /// BP * geometric mean of p_1..p_n.
  std::array<double, kMaxBleuOrder> cumulative{};
};

/// BLEU over character n-grams without smoothing. Prediction n-grams of an
/// order longer than the prediction give p_n = 0; an empty prediction scores
/// 0 everywhere. Throws DataError for an empty reference or max_n outside [1, 4].
BleuReport char_bleu(std::u32string_view prediction, std::u32string_view reference, std::size_t max_n = kMaxBleuOrder);

// ---------------------------------------------------------------------------
// Human annotation

enum class Verdict { correct, incorrect };

struct AnnotationRecord {
  std::string id;
  Language source_lang = Language::english;
  Language target_lang = Language::hindi;
  std::string input;
  std::string prediction;
  Verdict verdict = Verdict::correct;
  /// Corrected word; required when the verdict is incorrect.
  std::optional<std::string> reference;
  std::string annotator;

  /// Throws DataError naming the record id when an incorrect verdict has no reference.
  void validate() const;
  /// Reference for scoring: the correction, or the prediction when judged correct.
  const std::string& effective_reference() const;
};

/// snake_case keys: id, source_lang, target_lang, input, prediction, verdict,
/// reference, annotator.
nlohmann::json to_json(const AnnotationRecord& record);
/// Throws DataError describing the missing or invalid field.
AnnotationRecord annotation_from_json(const nlohmann::json& j);

std::vector<AnnotationRecord> read_annotations(std::istream& in);
void write_annotations(std::ostream& out, std::span<const AnnotationRecord> records);

struct AnnotationSummary {
  std::size_t correct_sounding_count = 0;
  std::size_t total_count = 0;
  double phonetic_accuracy = 0.0;
};

nlohmann::json to_json(const AnnotationSummary& summary);

/// Correct-sounding words over total words. Throws DataError on an empty set.
AnnotationSummary phonetic_accuracy(std::span<const AnnotationRecord> records);

// ---------------------------------------------------------------------------
// Pairwise reports

/// values[source][target]; the diagonal is never set.
struct PairwiseMatrix {
  std::map<Language, std::map<Language, double>> values;

  void set(Language source, Language target, double value);
  std::optional<double> get(Language source, Language target) const;
  /// Mean over cells whose languages are both Indic.
  std::optional<double> indic_average() const;
  nlohmann::json to_json() const;
};

/// metric name -> matrix; serialized as {metric: {source: {target: value}}}.
using MetricReport = std::map<std::string, PairwiseMatrix>;

nlohmann::json to_json(const MetricReport& report);

/// One scored prediction against a reference.
struct ScoredPair {
  Language source_lang = Language::english;
  Language target_lang = Language::hindi;
  std::u32string prediction;
  std::u32string reference;
};

/// Per (source, target) means of top1, cer_normalized, cer_vanilla and
/// bleu_cumulative_1..4, plus a count matrix.
MetricReport score_pairs(std::span<const ScoredPair> pairs);

/// Mean normalized CER and cumulative BLEU-n per pair from annotations, using
/// the corrected reference (or the prediction itself when judged correct),
/// plus per-pair phonetic accuracy.
MetricReport reference_metrics(std::span<const AnnotationRecord> records);

}  // namespace matra
