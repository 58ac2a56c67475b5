#include "matra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "matra/error.hpp"
#include "matra/utf8.hpp"

namespace matra {

using nlohmann::json;

double top1_accuracy(std::span<const std::u32string> predictions, std::span<const std::u32string> references) {
  if (predictions.size() != references.size())
    throw DataError("top1_accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(references.size()) + " references");
  if (predictions.empty()) throw DataError("top1_accuracy: no predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == references[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

EditOps edit_ops(std::u32string_view prediction, std::u32string_view truth) {
  const std::size_t m = prediction.size(), n = truth.size();
  std::vector<std::size_t> dist((m + 1) * (n + 1));
  auto d = [&](std::size_t i, std::size_t j) -> std::size_t& { return dist[i * (n + 1) + j]; };
  for (std::size_t i = 0; i <= m; ++i) d(i, 0) = i;
  for (std::size_t j = 0; j <= n; ++j) d(0, j) = j;
  for (std::size_t i = 1; i <= m; ++i)
    for (std::size_t j = 1; j <= n; ++j)
      d(i, j) = std::min({d(i - 1, j - 1) + (prediction[i - 1] == truth[j - 1] ? 0 : 1), d(i - 1, j) + 1,
                          d(i, j - 1) + 1});

  EditOps ops;
  ops.truth_length = n;
  std::size_t i = m, j = n;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = prediction[i - 1] == truth[j - 1];
      if (same && d(i, j) == d(i - 1, j - 1)) {
        ++ops.correct;
        --i, --j;
        continue;
      }
      if (!same && d(i, j) == d(i - 1, j - 1) + 1) {
        ++ops.substitutions;
        --i, --j;
        continue;
      }
    }
    if (i > 0 && d(i, j) == d(i - 1, j) + 1) {
      ++ops.deletions;
      --i;
    } else {
      ++ops.insertions;
      --j;
    }
  }
  return ops;
}

double vanilla_cer(const EditOps& ops) {
  if (ops.truth_length == 0) throw DataError("vanilla CER is undefined for an empty ground truth");
  return static_cast<double>(ops.distance()) / static_cast<double>(ops.truth_length);
}

double normalized_cer(const EditOps& ops) {
  const std::size_t denom = ops.distance() + ops.correct;
  if (denom == 0) throw DataError("normalized CER is undefined when both strings are empty");
  return static_cast<double>(ops.distance()) / static_cast<double>(denom);
}

CerPair cer(const EditOps& ops) { return {vanilla_cer(ops), normalized_cer(ops)}; }

// ---------------------------------------------------------------------------

BleuReport char_bleu(std::u32string_view prediction, std::u32string_view reference, std::size_t max_n) {
  if (reference.empty()) throw DataError("char_bleu: empty reference");
  if (max_n < 1 || max_n > kMaxBleuOrder) throw DataError("char_bleu: max_n must lie in [1, 4]");
  BleuReport report;
  report.max_n = max_n;
  if (prediction.empty()) return report;

  for (std::size_t n = 1; n <= max_n; ++n) {
    if (prediction.size() < n) continue;
    std::map<std::u32string_view, std::size_t> ref_counts;
    for (std::size_t i = 0; i + n <= reference.size(); ++i) ++ref_counts[reference.substr(i, n)];
    std::map<std::u32string_view, std::size_t> pred_counts;
    for (std::size_t i = 0; i + n <= prediction.size(); ++i) ++pred_counts[prediction.substr(i, n)];
    std::size_t clipped = 0;
    for (const auto& [gram, count] : pred_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) clipped += std::min(count, it->second);
    }
    report.precision[n - 1] = static_cast<double>(clipped) / static_cast<double>(prediction.size() - n + 1);
  }

  report.brevity_penalty =
      prediction.size() >= reference.size()
          ? 1.0
          : std::exp(1.0 - static_cast<double>(reference.size()) / static_cast<double>(prediction.size()));

  double product = 1.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const double p = report.precision[n - 1];
    report.individual[n - 1] = report.brevity_penalty * p;
    product *= p;
    report.cumulative[n - 1] = report.brevity_penalty * std::pow(product, 1.0 / static_cast<double>(n));
  }
  return report;
}

// ---------------------------------------------------------------------------

void AnnotationRecord::validate() const {
  if (verdict == Verdict::incorrect && (!reference || reference->empty()))
    throw DataError("annotation " + id + ": incorrect verdict requires a non-empty reference");
  if (source_lang == target_lang) throw DataError("annotation " + id + ": source and target language are equal");
}

const std::string& AnnotationRecord::effective_reference() const {
  if (verdict == Verdict::incorrect) {
    if (!reference || reference->empty())
      throw DataError("annotation " + id + ": incorrect verdict requires a non-empty reference");
    return *reference;
  }
  return reference && !reference->empty() ? *reference : prediction;
}

json to_json(const AnnotationRecord& r) {
  json j;
  j["id"] = r.id;
  j["source_lang"] = language_name(r.source_lang);
  j["target_lang"] = language_name(r.target_lang);
  j["input"] = r.input;
  j["prediction"] = r.prediction;
  j["verdict"] = r.verdict == Verdict::correct ? "correct" : "incorrect";
  j["reference"] = r.reference ? json(*r.reference) : json(nullptr);
  j["annotator"] = r.annotator;
  return j;
}

AnnotationRecord annotation_from_json(const json& j) {
  if (!j.is_object()) throw DataError("annotation must be a JSON object");
  auto text = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) throw DataError(std::string("annotation field '") + key + "' is missing");
      return {};
    }
    if (!it->is_string()) throw DataError(std::string("annotation field '") + key + "' must be a string");
    return it->get<std::string>();
  };
  auto lang = [&](const char* key) {
    const std::string name = text(key, true);
    auto l = parse_language(name);
    if (!l) throw DataError("annotation field '" + std::string(key) + "': unknown language '" + name + "'");
    return *l;
  };
  AnnotationRecord r;
  r.id = text("id", true);
  r.source_lang = lang("source_lang");
  r.target_lang = lang("target_lang");
  r.input = text("input", true);
  r.prediction = text("prediction", true);
  const std::string verdict = text("verdict", true);
  if (verdict == "correct") r.verdict = Verdict::correct;
  else if (verdict == "incorrect") r.verdict = Verdict::incorrect;
  else throw DataError("annotation " + r.id + ": verdict must be 'correct' or 'incorrect'");
  if (j.contains("reference") && !j.at("reference").is_null()) r.reference = text("reference", false);
  r.annotator = text("annotator", false);
  r.validate();
  return r;
}

std::vector<AnnotationRecord> read_annotations(std::istream& in) {
  std::vector<AnnotationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(annotation_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid annotation JSON: ") + e.what(), line_no);
    } catch (const DataError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return records;
}

void write_annotations(std::ostream& out, std::span<const AnnotationRecord> records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

json to_json(const AnnotationSummary& s) {
  return {{"correct_sounding_count", s.correct_sounding_count},
          {"total_count", s.total_count},
          {"phonetic_accuracy", s.phonetic_accuracy}};
}

AnnotationSummary phonetic_accuracy(std::span<const AnnotationRecord> records) {
  if (records.empty()) throw DataError("phonetic accuracy needs at least one annotation");
  AnnotationSummary s;
  s.total_count = records.size();
  for (const auto& r : records) s.correct_sounding_count += r.verdict == Verdict::correct;
  s.phonetic_accuracy = static_cast<double>(s.correct_sounding_count) / static_cast<double>(s.total_count);
  return s;
}

// ---------------------------------------------------------------------------

void PairwiseMatrix::set(Language source, Language target, double value) {
  if (source == target) throw DataError("pairwise matrix has no diagonal");
  values[source][target] = value;
}

std::optional<double> PairwiseMatrix::get(Language source, Language target) const {
  auto row = values.find(source);
  if (row == values.end()) return std::nullopt;
  auto cell = row->second.find(target);
  if (cell == row->second.end()) return std::nullopt;
  return cell->second;
}

std::optional<double> PairwiseMatrix::indic_average() const {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& [source, row] : values)
    for (const auto& [target, v] : row)
      if (is_indic(source) && is_indic(target)) {
        total += v;
        ++n;
      }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

json PairwiseMatrix::to_json() const {
  json j = json::object();
  for (const auto& [source, row] : values) {
    json r = json::object();
    for (const auto& [target, v] : row) r[std::string(language_name(target))] = v;
    j[std::string(language_name(source))] = std::move(r);
  }
  return j;
}

json to_json(const MetricReport& report) {
  json j = json::object();
  for (const auto& [metric, matrix] : report) j[metric] = matrix.to_json();
  return j;
}

namespace {

struct PairAccumulator {
  std::size_t count = 0;
  std::map<std::string, double> sums;
  void add(const std::string& metric, double v) { sums[metric] += v; }
};

MetricReport finish(const std::map<std::pair<Language, Language>, PairAccumulator>& acc) {
  MetricReport report;
  for (const auto& [pair, a] : acc) {
    report["count"].set(pair.first, pair.second, static_cast<double>(a.count));
    for (const auto& [metric, total] : a.sums)
      report[metric].set(pair.first, pair.second, total / static_cast<double>(a.count));
  }
  return report;
}

void score_into(PairAccumulator& a, std::u32string_view prediction, std::u32string_view reference) {
  const EditOps ops = edit_ops(prediction, reference);
  a.add("cer_normalized", normalized_cer(ops));
  a.add("cer_vanilla", vanilla_cer(ops));
  const BleuReport bleu = char_bleu(prediction, reference);
  for (std::size_t n = 1; n <= kMaxBleuOrder; ++n)
    a.add("bleu_cumulative_" + std::to_string(n), bleu.cumulative[n - 1]);
  ++a.count;
}

}  // namespace

MetricReport score_pairs(std::span<const ScoredPair> pairs) {
  if (pairs.empty()) throw DataError("no predictions to score");
  std::map<std::pair<Language, Language>, PairAccumulator> acc;
  for (const auto& p : pairs) {
    if (p.reference.empty()) throw DataError("empty reference for " + utf8::encode(p.prediction));
    auto& a = acc[{p.source_lang, p.target_lang}];
    a.add("top1", p.prediction == p.reference ? 1.0 : 0.0);
    score_into(a, p.prediction, p.reference);
  }
  return finish(acc);
}

MetricReport reference_metrics(std::span<const AnnotationRecord> records) {
  if (records.empty()) throw DataError("no annotations to score");
  std::map<std::pair<Language, Language>, PairAccumulator> acc;
  for (const auto& r : records) {
    r.validate();
    const std::u32string reference = utf8::decode(utf8::nfc(r.effective_reference()));
    if (reference.empty()) throw DataError("annotation " + r.id + ": empty reference");
    auto& a = acc[{r.source_lang, r.target_lang}];
    a.add("phonetic_accuracy", r.verdict == Verdict::correct ? 1.0 : 0.0);
    score_into(a, utf8::decode(utf8::nfc(r.prediction)), reference);
  }
  return finish(acc);
}

}  // namespace matra
