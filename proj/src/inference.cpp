#include "matra/inference.hpp"

#include <algorithm>

#include "matra/error.hpp"
#include "matra/utf8.hpp"

namespace matra {

std::vector<TokenId> greedy_decode(const ModelParams& params, std::span<const TokenId> src_ids, Language target_lang,
                                   std::size_t max_len) {
  const ModelConfig& config = params.config();
  nn::Graph encoder_graph(false);
  BoundParams bound(encoder_graph, params, false);
  const EncodedMemory memory = encode(bound, src_ids);

  std::vector<TokenId> prefix{language_token_id(target_lang)};
  std::vector<TokenId> out;
  while (out.size() < max_len && prefix.size() <= config.max_seq_len) {
    nn::Graph step(false);
    BoundParams step_params(step, params, false);
    EncodedMemory m{step.reference(memory.states.value(), false), memory.padding};
    const nn::Tensor logits = decode_logits(step_params, m, prefix).value();
    const auto last = logits.row(logits.rows() - 1);
    std::size_t best = 0;
    for (std::size_t c = 1; c < last.size(); ++c)
      if (last[c] > last[best]) best = c;
    const auto token = static_cast<TokenId>(best);
    if (token == kEosId) break;
    out.push_back(token);
    prefix.push_back(token);
  }
  return out;
}

std::vector<TokenId> greedy_decode(const Checkpoint& ckpt, std::span<const TokenId> src_ids, Language target_lang,
                                   std::size_t max_len) {
  return greedy_decode(ckpt.params, src_ids, target_lang, max_len);
}

std::u32string decode_word(const Checkpoint& ckpt, std::u32string_view word, Language target_lang) {
  auto ids = encode_source(word, target_lang, ckpt.vocab);
  return ckpt.vocab.decode(greedy_decode(ckpt, ids, target_lang, ckpt.config().max_seq_len));
}

bool TransliterationResult::has_intermediate() const noexcept {
  return std::any_of(words.begin(), words.end(), [](const WordResult& w) { return w.intermediate.has_value(); });
}

bool TransliterationResult::flagged() const noexcept {
  return std::any_of(words.begin(), words.end(), [](const WordResult& w) { return !w.out_of_script.empty(); });
}

std::u32string normalize_input(std::string_view text, Language lang) {
  std::u32string word = utf8::decode(utf8::nfc(text));
  if (lang == Language::english)
    for (char32_t& c : word)
      if (c >= U'a' && c <= U'z') c = c - U'a' + U'A';
  return word;
}

namespace {

struct Pass {
  std::u32string output;
  std::size_t length = 0;
};

Pass run_pass(const Checkpoint& ckpt, std::u32string_view word, Language target_lang, std::size_t& unknown) {
  std::size_t max_input = ckpt.config().max_seq_len - 2;
  if (word.size() > max_input)
    throw DataError("word of " + std::to_string(word.size()) + " characters exceeds the model limit of " +
                    std::to_string(max_input));
  auto ids = encode_source(word, target_lang, ckpt.vocab, &unknown);
  auto out = greedy_decode(ckpt, ids, target_lang, ckpt.config().max_seq_len);
  return {ckpt.vocab.decode(out), out.size()};
}

}  // namespace

TransliterationResult transliterate_word(const Checkpoint& ckpt, std::string_view word, Language source_lang,
                                         Language target_lang) {
  if (source_lang == target_lang) throw DataError("source and target language are both " + std::string(language_name(source_lang)));
  const std::u32string input = normalize_input(word, source_lang);
  if (input.empty()) throw DataError("empty word");
  for (char32_t c : input) {
    if (utf8::is_space(c)) throw DataError("expected a single word; use sentence mode for multiple words");
    if (!in_script(source_lang, c))
      throw ScriptError("character " + utf8::describe(c) + " '" + utf8::encode(c) + "' is not " +
                            std::string(language_name(source_lang)) + " script",
                        c);
  }

  WordResult w;
  w.input = utf8::encode(input);
  std::u32string output;
  if (source_lang == Language::english || target_lang == Language::english) {
    Pass pass = run_pass(ckpt, input, target_lang, w.unknown_characters);
    w.decode_lengths = {pass.length};
    output = std::move(pass.output);
  } else {
    Pass first = run_pass(ckpt, input, Language::english, w.unknown_characters);
    Pass second = run_pass(ckpt, first.output, target_lang, w.unknown_characters);
    w.intermediate = utf8::encode(first.output);
    w.decode_lengths = {first.length, second.length};
    output = std::move(second.output);
  }
  for (char32_t c : output)
    if (!in_script(target_lang, c)) w.out_of_script.push_back(c);
  w.output = utf8::encode(output);

  TransliterationResult result;
  result.output = w.output;
  result.words.push_back(std::move(w));
  return result;
}

TransliterationResult transliterate_text(const Checkpoint& ckpt, const TransliterationRequest& request) {
  const auto words = utf8::split_words(utf8::decode(request.text));
  if (words.empty()) throw DataError("empty text");
  TransliterationResult result;
  for (std::size_t i = 0; i < words.size(); ++i) {
    TransliterationResult one;
    try {
      one = transliterate_word(ckpt, utf8::encode(words[i]), request.source_lang, request.target_lang);
    } catch (const ScriptError& e) {
      throw ScriptError("word " + std::to_string(i) + ": " + e.what(), e.offending());
    } catch (const DataError& e) {
      throw DataError("word " + std::to_string(i) + ": " + e.what());
    }
    if (i) result.output += ' ';
    result.output += one.output;
    result.words.push_back(std::move(one.words.front()));
  }
  return result;
}

}  // namespace matra
