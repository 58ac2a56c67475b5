#include "matra/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "json.hpp"
#include "matra/error.hpp"

namespace matra {

std::string_view mode_name(TrainMode mode) noexcept {
  switch (mode) {
    case TrainMode::indic2eng: return "indic2eng";
    case TrainMode::eng2indic: return "eng2indic";
    case TrainMode::bidirectional: return "bidirectional";
  }
  return "unknown";
}

std::optional<TrainMode> parse_mode(std::string_view name) {
  for (TrainMode m : {TrainMode::indic2eng, TrainMode::eng2indic, TrainMode::bidirectional})
    if (mode_name(m) == name) return m;
  return std::nullopt;
}

namespace {

using nlohmann::json;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(const std::string& buf, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf[offset + static_cast<std::size_t>(i)]);
  return v;
}

json config_json(const ModelConfig& c) {
  return {{"num_encoder_layers", c.num_encoder_layers},
          {"num_decoder_layers", c.num_decoder_layers},
          {"embed_size", c.embed_size},
          {"heads", c.heads},
          {"hidden_dim", c.hidden_dim},
          {"max_seq_len", c.max_seq_len},
          {"dropout", c.dropout},
          {"vocab_size", c.vocab_size}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.num_encoder_layers = j.at("num_encoder_layers").get<std::size_t>();
  c.num_decoder_layers = j.at("num_decoder_layers").get<std::size_t>();
  c.embed_size = j.at("embed_size").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  const ModelParams& params = ckpt.params;
  if (ckpt.vocab.size() != params.config().vocab_size)
    throw CheckpointError("vocabulary has " + std::to_string(ckpt.vocab.size()) + " tokens but config.vocab_size is " +
                          std::to_string(params.config().vocab_size));
  json header;
  header["config"] = config_json(params.config());
  header["vocab"] = ckpt.vocab.tokens();
  json manifest = json::array();
  for (std::size_t i = 0; i < params.count(); ++i)
    manifest.push_back({{"name", params.name(i)}, {"shape", params.tensor(i).shape()}});
  header["tensors"] = std::move(manifest);
  header["metadata"] = {{"mode", mode_name(ckpt.metadata.mode)},
                        {"steps", ckpt.metadata.steps},
                        {"final_loss", ckpt.metadata.final_loss}};
  const std::string text = header.dump();

  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::string block;
  for (const nn::Tensor& t : params.tensors()) {
    block.resize(t.size() * 4);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(t[i]));
      for (int b = 0; b < 4; ++b) block[i * 4 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
    out.write(block.data(), static_cast<std::streamsize>(block.size()));
  }
  if (!out) throw CheckpointError("write failed");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  save_checkpoint(ckpt, out);
}

Checkpoint load_checkpoint(std::istream& in) {
  const std::string buf{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (buf.size() < 12) throw CheckpointError("file too short for a checkpoint header (" + std::to_string(buf.size()) + " bytes)");
  if (buf.compare(0, 4, kCheckpointMagic, 4) != 0) throw CheckpointError("bad magic bytes; not a MATR checkpoint");
  const std::uint32_t version = get_u32(buf, 4);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t header_len = get_u32(buf, 8);
  if (buf.size() < 12 + static_cast<std::size_t>(header_len)) throw CheckpointError("truncated checkpoint header");

  json header;
  try {
    header = json::parse(buf.begin() + 12, buf.begin() + 12 + header_len);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    ModelConfig config = config_from_json(header.at("config"));
    config.validate();
    ckpt.vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    if (ckpt.vocab.size() != config.vocab_size)
      throw CheckpointError("vocabulary has " + std::to_string(ckpt.vocab.size()) +
                            " tokens but config.vocab_size is " + std::to_string(config.vocab_size));
    ckpt.params = ModelParams(config);
    const json& manifest = header.at("tensors");
    if (manifest.size() != ckpt.params.count())
      throw CheckpointError("manifest lists " + std::to_string(manifest.size()) + " tensors, config requires " +
                            std::to_string(ckpt.params.count()));
    std::size_t offset = 12 + header_len;
    for (std::size_t i = 0; i < ckpt.params.count(); ++i) {
      const std::string name = manifest[i].at("name").get<std::string>();
      const auto shape = manifest[i].at("shape").get<nn::Shape>();
      nn::Tensor& t = ckpt.params.tensor(i);
      if (name != ckpt.params.name(i) || shape != t.shape())
        throw CheckpointError("manifest entry " + std::to_string(i) + " (" + name + " " + nn::to_string(shape) +
                              ") does not match expected " + ckpt.params.name(i) + " " + nn::to_string(t.shape()));
      if (buf.size() < offset + t.size() * 4) throw CheckpointError("truncated tensor data for " + name);
      for (std::size_t k = 0; k < t.size(); ++k) t[k] = std::bit_cast<float>(get_u32(buf, offset + k * 4));
      offset += t.size() * 4;
    }
    if (offset != buf.size()) throw CheckpointError(std::to_string(buf.size() - offset) + " trailing bytes after tensor data");

    const json& meta = header.at("metadata");
    auto mode = parse_mode(meta.at("mode").get<std::string>());
    if (!mode) throw CheckpointError("unknown training mode in metadata");
    ckpt.metadata = {*mode, meta.at("steps").get<std::uint64_t>(), meta.at("final_loss").get<double>()};
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("invalid checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("invalid model config: ") + e.what());
  } catch (const DataError& e) {
    throw CheckpointError(std::string("invalid vocabulary: ") + e.what());
  }
  if (!ckpt.params.all_finite()) throw CheckpointError("checkpoint contains non-finite weights");
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace matra
