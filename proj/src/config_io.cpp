#include "matra/config_io.hpp"

#include "matra/error.hpp"

namespace matra {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const std::string& key) {
  try {
    if constexpr (std::is_unsigned_v<T>) {
      const json& v = j.at(key);
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw ConfigError(key, "must be a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.at(key).is_number()) throw ConfigError(key, "must be a number");
    }
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

void require_object(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
}

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  require_object(j);
  ModelConfig c;
  if (j.contains("preset")) {
    const std::string preset = j.at("preset").is_string() ? j.at("preset").get<std::string>() : "";
    if (preset == "toy") c = ModelConfig::toy(0);
    else if (preset != "paper") throw ConfigError("preset", "must be 'paper' or 'toy'");
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    if (key == "num_encoder_layers") c.num_encoder_layers = field<std::size_t>(j, key);
    else if (key == "num_decoder_layers") c.num_decoder_layers = field<std::size_t>(j, key);
    else if (key == "embed_size") c.embed_size = field<std::size_t>(j, key);
    else if (key == "heads") c.heads = field<std::size_t>(j, key);
    else if (key == "hidden_dim") c.hidden_dim = field<std::size_t>(j, key);
    else if (key == "max_seq_len") c.max_seq_len = field<std::size_t>(j, key);
    else if (key == "dropout") c.dropout = field<double>(j, key);
    else if (key == "vocab_size") c.vocab_size = field<std::size_t>(j, key);
    else throw ConfigError(key, "unknown model config field");
  }
  ModelConfig probe = c;
  if (probe.vocab_size == 0) probe.vocab_size = kFirstCharacterId;
  probe.validate();
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  require_object(j);
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") {
      if (!value.is_string() || value.get<std::string>() != "paper") throw ConfigError("preset", "must be 'paper'");
    } else if (key == "batch_size") c.batch_size = field<std::size_t>(j, key);
    else if (key == "epochs") c.epochs = field<std::size_t>(j, key);
    else if (key == "warmup_steps") c.warmup_steps = field<std::size_t>(j, key);
    else if (key == "peak_lr") c.peak_lr = field<double>(j, key);
    else if (key == "seed") c.seed = field<std::uint64_t>(j, key);
    else if (key == "clip_norm") c.clip_norm = field<double>(j, key);
    else if (key == "mode") {
      auto mode = value.is_string() ? parse_mode(value.get<std::string>()) : std::nullopt;
      if (!mode) throw ConfigError("mode", "must be indic2eng, eng2indic or bidirectional");
      c.mode = *mode;
    } else {
      throw ConfigError(key, "unknown train config field");
    }
  }
  c.validate();
  return c;
}

json to_json(const ModelConfig& c) {
  return {{"num_encoder_layers", c.num_encoder_layers},
          {"num_decoder_layers", c.num_decoder_layers},
          {"embed_size", c.embed_size},
          {"heads", c.heads},
          {"hidden_dim", c.hidden_dim},
          {"max_seq_len", c.max_seq_len},
          {"dropout", c.dropout},
          {"vocab_size", c.vocab_size}};
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"epochs", c.epochs},  {"warmup_steps", c.warmup_steps},
          {"peak_lr", c.peak_lr},       {"seed", c.seed},      {"mode", mode_name(c.mode)},
          {"clip_norm", c.clip_norm}};
}

}  // namespace matra
