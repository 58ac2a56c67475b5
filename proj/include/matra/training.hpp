#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matra/checkpoint.hpp"
#include "matra/corpus.hpp"
#include "matra/model.hpp"
#include "matra/tensor.hpp"

namespace matra {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 16;
  std::size_t warmup_steps = 300;
  double peak_lr = 3e-4;
  std::uint64_t seed = 42;
  TrainMode mode = TrainMode::bidirectional;
  /// Global gradient-norm ceiling; 0 disables clipping.
  double clip_norm = 1.0;

  /// Batch 32, 16 epochs, 300 warmup steps.
  static TrainConfig paper_preset() { return {}; }

  void validate() const;
};

/// Linear warmup to 1 at `warmup_steps`, then linear decay to 0 at
/// `total_steps`. Throws ConfigError unless warmup_steps < total_steps and
/// 0 <= step <= total_steps.
double lr_multiplier(std::size_t step, std::size_t warmup_steps, std::size_t total_steps);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<nn::Tensor> first_moment;
  std::vector<nn::Tensor> second_moment;
};

/// One bias-corrected Adam update in place. Throws DataError naming the tensor
/// when a gradient is non-finite, ShapeError on a shape mismatch.
void optimizer_step(std::span<nn::Tensor> params, std::span<const nn::Tensor> grads, AdamState& state, double lr,
                    std::span<const std::string> names = {}, const AdamSettings& settings = {});

/// Scales `grads` so their joint L2 norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_global_norm(std::span<nn::Tensor> grads, double max_norm);

/// indic2eng keeps English-target triples, eng2indic English-source triples,
/// bidirectional everything. Throws DataError when nothing remains.
Corpus filter_by_mode(const Corpus& corpus, TrainMode mode);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> dev_top1;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

/// JSON-lines {epoch, mean_loss, dev_top1}; dev_top1 is null without a dev set.
void write_history(std::ostream& out, const TrainHistory& history);

struct TrainOptions {
  /// Greedy-decoded each epoch for dev top-1 when set.
  const Corpus* dev = nullptr;
  /// Defaults to build_vocab over the filtered training corpus.
  const Vocabulary* vocab = nullptr;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainHistory history;
  /// Triples dropped because they exceed max_seq_len once encoded.
  std::size_t rejected_examples = 0;
};

/// Seeded mini-batch training: shuffled batches padded with <PAD>,
/// teacher-forced loss, backward, clipping and Adam at
/// peak_lr * lr_multiplier(step). The returned weights are rounded to
/// checkpoint precision. Throws DataError when the loss becomes non-finite.
TrainResult train(const Corpus& corpus, ModelConfig model_config, const TrainConfig& train_config,
                  const TrainOptions& options = {});

/// Greedy-decode exact-match accuracy of a checkpoint over a corpus.
double corpus_top1(const Checkpoint& ckpt, const Corpus& corpus);

}  // namespace matra
