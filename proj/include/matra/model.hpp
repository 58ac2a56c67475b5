#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "matra/autograd.hpp"
#include "matra/tensor.hpp"
#include "matra/vocabulary.hpp"

namespace matra {

struct ModelConfig {
  std::size_t num_encoder_layers = 12;
  std::size_t num_decoder_layers = 12;
  std::size_t embed_size = 768;
  std::size_t heads = 12;
  std::size_t hidden_dim = 3072;
  std::size_t max_seq_len = 50;
  double dropout = 0.0;
  std::size_t vocab_size = 0;

  /// 12+12 layers, 768 wide, 12 heads, 3072 hidden, 50 positions, no dropout.
  static ModelConfig paper_preset(std::size_t vocab_size);
  /// 2+2 layers, 32 wide, 4 heads, 64 hidden; the configuration the test
  /// suites train and differentiate.
  static ModelConfig toy(std::size_t vocab_size, std::size_t max_seq_len = 16);

  std::size_t head_dim() const noexcept { return heads ? embed_size / heads : 0; }

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named parameter tensors in a fixed, config-determined order.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }

  /// Every parameter name with its required shape, in storage order.
  static std::vector<std::pair<std::string, nn::Shape>> layout(const ModelConfig& config);

  const nn::Tensor& get(const std::string& name) const;
  nn::Tensor& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t count() const noexcept { return tensors_.size(); }
  std::span<nn::Tensor> tensors() noexcept { return tensors_; }
  std::span<const nn::Tensor> tensors() const noexcept { return tensors_; }
  std::span<const std::string> names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const nn::Tensor& tensor(std::size_t i) const { return tensors_[i]; }
  nn::Tensor& tensor(std::size_t i) { return tensors_[i]; }

  std::size_t scalar_count() const noexcept;
  bool all_finite() const noexcept;
  /// Rounds every value to the nearest 32-bit float (checkpoint precision).
  void round_to_float();

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.config_ == b.config_ && a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  ModelConfig config_;
  std::vector<std::string> names_;
  std::vector<nn::Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// Seeded initialization: embeddings ~ N(0, embed_size^-1), projection
/// weights ~ N(0, fan_in^-1), biases 0, layer-norm gain 1 and bias 0. Values
/// are representable as 32-bit floats so a fresh model survives a checkpoint
/// round trip unchanged.
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

/// Parameters bound as graph leaves for one forward/backward pass.
class BoundParams {
 public:
  /// `trainable` binds parameters (gradients tracked) instead of constants.
  BoundParams(nn::Graph& graph, const ModelParams& params, bool trainable);
  /// Wraps leaves already in `graph`, one per ModelParams::layout entry, in order.
  BoundParams(nn::Graph& graph, const ModelConfig& config, std::span<const nn::Var> vars);

  nn::Graph& graph() const noexcept { return *graph_; }
  const ModelConfig& config() const noexcept { return *config_; }
  nn::Var operator[](const std::string& name) const;
  /// Parameter leaves in ModelParams order.
  const std::vector<nn::Var>& vars() const noexcept { return vars_; }

 private:
  nn::Graph* graph_;
  const ModelConfig* config_;
  std::map<std::string, nn::Var> by_name_;
  std::vector<nn::Var> vars_;
};

/// Optional training-time behaviour of a forward pass.
struct ForwardOptions {
  /// Dropout is applied only when this is set and config.dropout > 0.
  std::mt19937_64* dropout_rng = nullptr;
};

/// Encoder output plus the key mask (1 = <PAD>) used by cross-attention.
struct EncodedMemory {
  nn::Var states;
  std::vector<std::uint8_t> padding;
};

EncodedMemory encode(const BoundParams& bound, std::span<const TokenId> src_ids, const ForwardOptions& options = {});

/// Row i of the result scores the token following prefix position i.
nn::Var decode_logits(const BoundParams& bound, const EncodedMemory& memory, std::span<const TokenId> tgt_prefix_ids,
                      const ForwardOptions& options = {});

/// Token-level mean cross-entropy of teacher-forced decoding over every
/// non-pad label of the batch. Sequences may carry trailing <PAD>.
nn::Var forward_loss(const BoundParams& bound, std::span<const EncodedExample> batch,
                     const ForwardOptions& options = {});

// Value-level conveniences over immutable parameters.

struct Memory {
  nn::Tensor states;
  std::vector<std::uint8_t> padding;
};

Memory encode(const ModelParams& params, std::span<const TokenId> src_ids);
nn::Tensor decode_logits(const ModelParams& params, const Memory& memory, std::span<const TokenId> tgt_prefix_ids);
double forward_loss(const ModelParams& params, std::span<const EncodedExample> batch);

/// Mean over positions of ||a_i - b_i|| / ||a_i|| between two encoder memories
/// of equal shape. Used to report how much the leading language token moves
/// the encoding.
double mean_relative_difference(const nn::Tensor& a, const nn::Tensor& b);

/// Pads every example's source and target with <PAD> to the batch maxima.
std::vector<EncodedExample> pad_batch(std::span<const EncodedExample> batch);

}  // namespace matra
