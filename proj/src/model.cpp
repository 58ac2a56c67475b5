#include "matra/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "matra/error.hpp"

namespace matra {

using nn::Graph;
using nn::Tensor;
using nn::Var;

// ---------------------------------------------------------------------------
// Configuration

ModelConfig ModelConfig::paper_preset(std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  return c;
}

ModelConfig ModelConfig::toy(std::size_t vocab_size, std::size_t max_seq_len) {
  ModelConfig c;
  c.num_encoder_layers = 2;
  c.num_decoder_layers = 2;
  c.embed_size = 32;
  c.heads = 4;
  c.hidden_dim = 64;
  c.max_seq_len = max_seq_len;
  c.dropout = 0.0;
  c.vocab_size = vocab_size;
  return c;
}

void ModelConfig::validate() const {
  if (embed_size == 0) throw ConfigError("embed_size", "must be >= 1");
  if (heads == 0) throw ConfigError("heads", "must be >= 1");
  if (embed_size % heads != 0)
    throw ConfigError("embed_size", "must be divisible by heads (" + std::to_string(embed_size) + " % " +
                                        std::to_string(heads) + " != 0)");
  if (hidden_dim == 0) throw ConfigError("hidden_dim", "must be >= 1");
  if (max_seq_len < 2) throw ConfigError("max_seq_len", "must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout", "must lie in [0, 1)");
  if (vocab_size < static_cast<std::size_t>(kFirstCharacterId))
    throw ConfigError("vocab_size", "must cover the " + std::to_string(kFirstCharacterId) + " reserved tokens");
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

void append_attention(std::vector<std::pair<std::string, nn::Shape>>& out, const std::string& prefix, std::size_t e) {
  for (const char* p : {"q", "k", "v", "o"}) {
    out.emplace_back(prefix + ".w" + p, nn::Shape{e, e});
    out.emplace_back(prefix + ".b" + p, nn::Shape{e});
  }
}

void append_norm(std::vector<std::pair<std::string, nn::Shape>>& out, const std::string& prefix, std::size_t e) {
  out.emplace_back(prefix + ".gain", nn::Shape{e});
  out.emplace_back(prefix + ".bias", nn::Shape{e});
}

void append_feed_forward(std::vector<std::pair<std::string, nn::Shape>>& out, const std::string& prefix,
                         std::size_t e, std::size_t h) {
  out.emplace_back(prefix + ".w1", nn::Shape{e, h});
  out.emplace_back(prefix + ".b1", nn::Shape{h});
  out.emplace_back(prefix + ".w2", nn::Shape{h, e});
  out.emplace_back(prefix + ".b2", nn::Shape{e});
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Standard normal from the raw engine output (Box-Muller), so initialization
// does not depend on the standard library's distribution implementation.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

std::vector<std::pair<std::string, nn::Shape>> ModelParams::layout(const ModelConfig& c) {
  const std::size_t e = c.embed_size;
  std::vector<std::pair<std::string, nn::Shape>> out;
  out.emplace_back("tok_embed", nn::Shape{c.vocab_size, e});
  out.emplace_back("pos_embed", nn::Shape{c.max_seq_len, e});
  for (std::size_t l = 0; l < c.num_encoder_layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    append_attention(out, p + ".self", e);
    append_norm(out, p + ".norm1", e);
    append_feed_forward(out, p + ".ff", e, c.hidden_dim);
    append_norm(out, p + ".norm2", e);
  }
  for (std::size_t l = 0; l < c.num_decoder_layers; ++l) {
    const std::string p = "dec." + std::to_string(l);
    append_attention(out, p + ".self", e);
    append_norm(out, p + ".norm1", e);
    append_attention(out, p + ".cross", e);
    append_norm(out, p + ".norm2", e);
    append_feed_forward(out, p + ".ff", e, c.hidden_dim);
    append_norm(out, p + ".norm3", e);
  }
  out.emplace_back("out.w", nn::Shape{e, c.vocab_size});
  out.emplace_back("out.b", nn::Shape{c.vocab_size});
  return out;
}

ModelParams::ModelParams(ModelConfig config) : config_(config) {
  config_.validate();
  for (auto& [name, shape] : layout(config_)) {
    index_.emplace(name, names_.size());
    names_.push_back(name);
    tensors_.emplace_back(shape);
  }
}

const Tensor& ModelParams::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return tensors_[it->second];
}

Tensor& ModelParams::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ModelParams&>(*this).get(name));
}

std::size_t ModelParams::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

bool ModelParams::all_finite() const noexcept {
  for (const auto& t : tensors_)
    if (!t.all_finite()) return false;
  return true;
}

void ModelParams::round_to_float() {
  for (auto& t : tensors_)
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  ModelParams params(config);
  NormalSampler normal(seed);
  for (std::size_t i = 0; i < params.count(); ++i) {
    const std::string& name = params.name(i);
    Tensor& t = params.tensor(i);
    double std_dev = 0.0;
    double fill = 0.0;
    if (name == "tok_embed" || name == "pos_embed") {
      std_dev = 1.0 / std::sqrt(static_cast<double>(config.embed_size));
    } else if (ends_with(name, ".gain")) {
      fill = 1.0;
    } else if (t.rank() == 2) {
      std_dev = 1.0 / std::sqrt(static_cast<double>(t.rows()));  // fan-in
    }
    for (double& v : t.values())
      v = std_dev > 0.0 ? static_cast<double>(static_cast<float>(std_dev * normal())) : fill;
  }
  return params;
}

BoundParams::BoundParams(Graph& graph, const ModelParams& params, bool trainable)
    : graph_(&graph), config_(&params.config()) {
  for (std::size_t i = 0; i < params.count(); ++i) {
    Var v = graph.reference(params.tensor(i), trainable);
    by_name_.emplace(params.name(i), v);
    vars_.push_back(v);
  }
}

BoundParams::BoundParams(Graph& graph, const ModelConfig& config, std::span<const Var> vars)
    : graph_(&graph), config_(&config), vars_(vars.begin(), vars.end()) {
  const auto layout = ModelParams::layout(config);
  if (layout.size() != vars.size())
    throw ShapeError("BoundParams: expected " + std::to_string(layout.size()) + " tensors, got " +
                     std::to_string(vars.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (vars[i].shape() != layout[i].second)
      throw ShapeError("BoundParams: " + layout[i].first + " has shape " + nn::to_string(vars[i].shape()) +
                       ", expected " + nn::to_string(layout[i].second));
    by_name_.emplace(layout[i].first, vars[i]);
  }
}

Var BoundParams::operator[](const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error("unknown parameter " + name);
  return it->second;
}

// ---------------------------------------------------------------------------
// Forward pass

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Var linear(const BoundParams& p, Var x, const std::string& w, const std::string& b) {
  return nn::add(nn::matmul(x, p[w]), p[b]);
}

Var dropout(const BoundParams& p, Var x, const ForwardOptions& options) {
  const double rate = p.config().dropout;
  if (!options.dropout_rng || rate <= 0.0) return x;
  std::vector<std::uint8_t> drop(x.value().size());
  const auto threshold = static_cast<std::uint64_t>(rate * 18446744073709551616.0);
  for (auto& d : drop) d = (*options.dropout_rng)() < threshold;
  return nn::scale(nn::masked_fill(x, drop, 0.0), 1.0 / (1.0 - rate));
}

// Multi-head attention; mask is [queries x keys], 1 = blocked.
Var attention(const BoundParams& p, const std::string& prefix, Var queries, Var keys_values,
              const std::vector<std::uint8_t>& mask) {
  const std::size_t heads = p.config().heads;
  const std::size_t d = p.config().head_dim();
  const double scaling = 1.0 / std::sqrt(static_cast<double>(d));
  Var q = linear(p, queries, prefix + ".wq", prefix + ".bq");
  Var k = linear(p, keys_values, prefix + ".wk", prefix + ".bk");
  Var v = linear(p, keys_values, prefix + ".wv", prefix + ".bv");
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = nn::slice(q, 1, h * d, (h + 1) * d);
    Var kh = nn::slice(k, 1, h * d, (h + 1) * d);
    Var vh = nn::slice(v, 1, h * d, (h + 1) * d);
    Var scores = nn::scale(nn::matmul(qh, nn::transpose(kh)), scaling);
    scores = nn::masked_fill(scores, mask, kNegInf);
    outputs.push_back(nn::matmul(nn::softmax(scores), vh));
  }
  Var joined = heads == 1 ? outputs.front() : nn::concat(outputs, 1);
  return linear(p, joined, prefix + ".wo", prefix + ".bo");
}

Var add_norm(const BoundParams& p, Var residual, Var update, const std::string& norm) {
  return nn::layer_norm(nn::add(residual, update), p[norm + ".gain"], p[norm + ".bias"]);
}

Var feed_forward(const BoundParams& p, const std::string& prefix, Var x, const ForwardOptions& options) {
  Var hidden = nn::relu(linear(p, x, prefix + ".w1", prefix + ".b1"));
  return dropout(p, linear(p, hidden, prefix + ".w2", prefix + ".b2"), options);
}

void check_ids(const ModelConfig& c, std::span<const TokenId> ids, std::size_t min_len, const char* what) {
  if (ids.size() < min_len || ids.size() > c.max_seq_len)
    throw DataError(std::string(what) + " length " + std::to_string(ids.size()) + " outside [" +
                    std::to_string(min_len) + ", " + std::to_string(c.max_seq_len) + "]");
  for (TokenId id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size)
      throw DataError(std::string(what) + " token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(c.vocab_size));
}

Var embed(const BoundParams& p, std::span<const TokenId> ids, const ForwardOptions& options) {
  std::vector<TokenId> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<TokenId>(i);
  Var x = nn::add(nn::embedding_lookup(p["tok_embed"], ids), nn::embedding_lookup(p["pos_embed"], positions));
  return dropout(p, x, options);
}

}  // namespace

EncodedMemory encode(const BoundParams& p, std::span<const TokenId> src_ids, const ForwardOptions& options) {
  const ModelConfig& c = p.config();
  check_ids(c, src_ids, 2, "source");
  const std::size_t n = src_ids.size();

  EncodedMemory memory;
  memory.padding.resize(n);
  for (std::size_t j = 0; j < n; ++j) memory.padding[j] = src_ids[j] == kPadId;
  std::vector<std::uint8_t> mask(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) mask[i * n + j] = memory.padding[j];

  Var x = embed(p, src_ids, options);
  for (std::size_t l = 0; l < c.num_encoder_layers; ++l) {
    const std::string prefix = "enc." + std::to_string(l);
    Var a = dropout(p, attention(p, prefix + ".self", x, x, mask), options);
    x = add_norm(p, x, a, prefix + ".norm1");
    x = add_norm(p, x, feed_forward(p, prefix + ".ff", x, options), prefix + ".norm2");
  }
  memory.states = x;
  return memory;
}

Var decode_logits(const BoundParams& p, const EncodedMemory& memory, std::span<const TokenId> prefix_ids,
                  const ForwardOptions& options) {
  const ModelConfig& c = p.config();
  check_ids(c, prefix_ids, 1, "target prefix");
  const std::size_t t = prefix_ids.size();
  const std::size_t s = memory.padding.size();

  std::vector<std::uint8_t> causal(t * t);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) causal[i * t + j] = j > i || prefix_ids[j] == kPadId;
  std::vector<std::uint8_t> cross(t * s);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < s; ++j) cross[i * s + j] = memory.padding[j];

  Var y = embed(p, prefix_ids, options);
  for (std::size_t l = 0; l < c.num_decoder_layers; ++l) {
    const std::string prefix = "dec." + std::to_string(l);
    Var a = dropout(p, attention(p, prefix + ".self", y, y, causal), options);
    y = add_norm(p, y, a, prefix + ".norm1");
    Var x = dropout(p, attention(p, prefix + ".cross", y, memory.states, cross), options);
    y = add_norm(p, y, x, prefix + ".norm2");
    y = add_norm(p, y, feed_forward(p, prefix + ".ff", y, options), prefix + ".norm3");
  }
  return linear(p, y, "out.w", "out.b");
}

Var forward_loss(const BoundParams& p, std::span<const EncodedExample> batch, const ForwardOptions& options) {
  if (batch.empty()) throw DataError("forward_loss: empty batch");
  std::size_t labels_total = 0;
  Var total{};
  bool have_total = false;
  for (const EncodedExample& ex : batch) {
    if (ex.tgt_ids.size() < 2) throw DataError("forward_loss: target needs at least two tokens");
    std::vector<TokenId> inputs(ex.tgt_ids.begin(), ex.tgt_ids.end() - 1);
    std::vector<TokenId> labels(ex.tgt_ids.begin() + 1, ex.tgt_ids.end());
    std::size_t counted = 0;
    for (TokenId l : labels) counted += l != kPadId;
    if (counted == 0) continue;
    labels_total += counted;
    EncodedMemory memory = encode(p, ex.src_ids, options);
    Var logits = decode_logits(p, memory, inputs, options);
    Var ce = nn::cross_entropy_sum(logits, labels, kPadId);
    total = have_total ? nn::add(total, ce) : ce;
    have_total = true;
  }
  if (labels_total == 0) throw DataError("forward_loss: batch has no non-pad target labels");
  return nn::scale(total, 1.0 / static_cast<double>(labels_total));
}

// ---------------------------------------------------------------------------

Memory encode(const ModelParams& params, std::span<const TokenId> src_ids) {
  Graph g(false);
  BoundParams p(g, params, false);
  EncodedMemory m = encode(p, src_ids);
  return {m.states.value(), std::move(m.padding)};
}

Tensor decode_logits(const ModelParams& params, const Memory& memory, std::span<const TokenId> tgt_prefix_ids) {
  Graph g(false);
  BoundParams p(g, params, false);
  const auto& c = params.config();
  if (memory.states.rank() != 2 || memory.states.cols() != c.embed_size ||
      memory.states.rows() != memory.padding.size())
    throw ShapeError("decode_logits: memory of shape " + nn::to_string(memory.states.shape()) +
                     " does not match the model");
  EncodedMemory m{g.reference(memory.states, false), memory.padding};
  return decode_logits(p, m, tgt_prefix_ids).value();
}

double forward_loss(const ModelParams& params, std::span<const EncodedExample> batch) {
  Graph g(false);
  BoundParams p(g, params, false);
  return forward_loss(p, batch).value().item();
}

double mean_relative_difference(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.rank() != 2) throw ShapeError("mean_relative_difference: shape mismatch");
  double total = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double diff = 0.0, norm = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      diff += (a.at(r, c) - b.at(r, c)) * (a.at(r, c) - b.at(r, c));
      norm += a.at(r, c) * a.at(r, c);
    }
    total += norm > 0.0 ? std::sqrt(diff / norm) : 0.0;
  }
  return total / static_cast<double>(a.rows());
}

std::vector<EncodedExample> pad_batch(std::span<const EncodedExample> batch) {
  std::size_t src_len = 0, tgt_len = 0;
  for (const auto& ex : batch) {
    src_len = std::max(src_len, ex.src_ids.size());
    tgt_len = std::max(tgt_len, ex.tgt_ids.size());
  }
  std::vector<EncodedExample> out(batch.begin(), batch.end());
  for (auto& ex : out) {
    ex.src_ids.resize(src_len, kPadId);
    ex.tgt_ids.resize(tgt_len, kPadId);
  }
  return out;
}

}  // namespace matra
