#pragma once

// Fixtures and independent reference implementations shared by the test
// binaries. Nothing here calls into the code it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "matra/corpus.hpp"
#include "matra/model.hpp"
#include "matra/training.hpp"

namespace matra::testing {

// ---------------------------------------------------------------------------
// Synthetic corpus: four consonants per script, eight English words, every
// word paired with each Indic language in both directions (64 triples).

inline constexpr std::array<char32_t, 4> kLatin = {U'K', U'L', U'M', U'R'};

inline std::array<char32_t, 4> consonants(Language lang) {
  switch (lang) {
    case Language::hindi: return {0x0915, 0x0932, 0x092E, 0x0930};
    case Language::bengali: return {0x0995, 0x09B2, 0x09AE, 0x09B0};
    case Language::tamil: return {0x0B95, 0x0BB2, 0x0BAE, 0x0BB0};
    case Language::kannada: return {0x0C95, 0x0CB2, 0x0CAE, 0x0CB0};
    case Language::english: break;
  }
  return kLatin;
}

inline const std::vector<std::u32string>& synthetic_words() {
  static const std::vector<std::u32string> words = {U"KLM", U"MRK", U"LLR", U"RKMM",
                                                    U"KRL", U"MLRK", U"RRK", U"LMKR"};
  return words;
}

inline std::u32string spell(std::u32string_view english, Language lang) {
  const auto to = consonants(lang);
  std::u32string out;
  for (char32_t c : english) {
    const auto i = static_cast<std::size_t>(std::find(kLatin.begin(), kLatin.end(), c) - kLatin.begin());
    out += to[i];
  }
  return out;
}

inline Corpus synthetic_corpus() {
  Corpus corpus;
  for (Language lang : kIndicLanguages)
    for (const auto& w : synthetic_words())
      corpus.triples.push_back({w, spell(w, lang), lang, Language::english});
  for (Language lang : kIndicLanguages)
    for (const auto& w : synthetic_words())
      corpus.triples.push_back({spell(w, lang), w, Language::english, lang});
  return corpus;
}

/// Settings the memorization experiment trains with.
inline TrainConfig memorization_train_config() {
  TrainConfig c;
  c.batch_size = 16;
  c.epochs = 120;
  c.warmup_steps = 40;
  c.peak_lr = 1e-2;
  c.seed = 7;
  c.mode = TrainMode::bidirectional;
  return c;
}

// ---------------------------------------------------------------------------
// Edit distance by exhaustive search over alignments (exponential; short strings only).

inline std::size_t brute_edit_distance(std::u32string_view a, std::u32string_view b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  const std::size_t sub = brute_edit_distance(a.substr(1), b.substr(1)) + (a[0] == b[0] ? 0 : 1);
  const std::size_t del = brute_edit_distance(a.substr(1), b) + 1;
  const std::size_t ins = brute_edit_distance(a, b.substr(1)) + 1;
  return std::min({sub, del, ins});
}

/// Every string over `alphabet` with length in [0, max_len].
inline std::vector<std::u32string> all_strings(std::u32string_view alphabet, std::size_t max_len) {
  std::vector<std::u32string> out{U""};
  std::vector<std::u32string> frontier{U""};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::u32string> next;
    for (const auto& s : frontier)
      for (char32_t c : alphabet) next.push_back(s + c);
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// BLEU by explicit n-gram tables.

struct HandBleu {
  std::vector<double> precision;
  double bp = 0.0;
  std::vector<double> cumulative;
};

inline HandBleu hand_bleu(const std::u32string& pred, const std::u32string& ref, std::size_t max_n) {
  HandBleu h;
  if (pred.empty()) {
    h.precision.assign(max_n, 0.0);
    h.cumulative.assign(max_n, 0.0);
    return h;
  }
  for (std::size_t n = 1; n <= max_n; ++n) {
    std::map<std::u32string, int> p, r;
    for (std::size_t i = 0; i + n <= pred.size(); ++i) ++p[pred.substr(i, n)];
    for (std::size_t i = 0; i + n <= ref.size(); ++i) ++r[ref.substr(i, n)];
    int total = 0, matched = 0;
    for (const auto& [gram, count] : p) {
      total += count;
      auto it = r.find(gram);
      matched += std::min(count, it == r.end() ? 0 : it->second);
    }
    h.precision.push_back(total ? static_cast<double>(matched) / total : 0.0);
  }
  h.bp = pred.size() >= ref.size() ? 1.0 : std::exp(1.0 - static_cast<double>(ref.size()) / pred.size());
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 1; n <= max_n; ++n) {
    if (h.precision[n - 1] == 0.0) zero = true;
    else log_sum += std::log(h.precision[n - 1]);
    h.cumulative.push_back(zero ? 0.0 : h.bp * std::exp(log_sum / n));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Plain-loop dense algebra for hand-stepped attention checks.

using Mat = std::vector<std::vector<double>>;

inline Mat mat_mul(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Mat mat_t(const Mat& a) {
  Mat t(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline void softmax_rows(Mat& a) {
  for (auto& row : a) {
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(v - m));
    for (double& v : row) v /= z;
  }
}

/// softmax(q k^T / sqrt(d) + causal) v for one head, with an optional causal mask.
inline Mat attention(const Mat& q, const Mat& k, const Mat& v, bool causal) {
  Mat s = mat_mul(q, mat_t(k));
  const double scale = 1.0 / std::sqrt(static_cast<double>(q[0].size()));
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s[i].size(); ++j) s[i][j] = causal && j > i ? -INFINITY : s[i][j] * scale;
  softmax_rows(s);
  return mat_mul(s, v);
}

}  // namespace matra::testing
