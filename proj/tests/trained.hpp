#pragma once

#include "matra/training.hpp"
#include "support.hpp"

namespace matra::testing {

/// The toy model trained to memorize the synthetic corpus; built once per process.
inline const Checkpoint& memorized_checkpoint() {
  static const Checkpoint ckpt =
      train(synthetic_corpus(), ModelConfig::toy(0), memorization_train_config()).checkpoint;
  return ckpt;
}

/// An untrained toy model over the synthetic vocabulary.
inline Checkpoint fresh_checkpoint(std::uint64_t seed) {
  Vocabulary vocab = build_vocab(synthetic_corpus());
  ModelParams params = init_model(ModelConfig::toy(vocab.size()), seed);
  return Checkpoint{std::move(params), std::move(vocab), {}};
}

}  // namespace matra::testing
