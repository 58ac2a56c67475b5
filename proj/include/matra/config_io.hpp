#pragma once

#include "json.hpp"
#include "matra/model.hpp"
#include "matra/training.hpp"

namespace matra {

/// {"preset": "paper" | "toy", ...field overrides}. Unknown keys and wrong
/// types raise ConfigError naming the field; the result is validated except
/// for vocab_size, which training fills in from the vocabulary when 0.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// {"preset": "paper", batch_size, epochs, warmup_steps, peak_lr, seed, mode, clip_norm}.
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelConfig& config);
nlohmann::json to_json(const TrainConfig& config);

}  // namespace matra
