#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "matra/model.hpp"
#include "matra/vocabulary.hpp"

namespace matra {

enum class TrainMode { indic2eng, eng2indic, bidirectional };

std::string_view mode_name(TrainMode mode) noexcept;
std::optional<TrainMode> parse_mode(std::string_view name);

struct TrainingMetadata {
  TrainMode mode = TrainMode::bidirectional;
  std::uint64_t steps = 0;
  double final_loss = 0.0;
};

/// Self-contained model: configuration, vocabulary and weights.
struct Checkpoint {
  ModelParams params;
  Vocabulary vocab;
  TrainingMetadata metadata;

  const ModelConfig& config() const noexcept { return params.config(); }
};

inline constexpr char kCheckpointMagic[4] = {'M', 'A', 'T', 'R'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: magic "MATR", u32 version, u32 header length, UTF-8 JSON header
/// {config, vocab, tensors: [{name, shape}], metadata}, then every tensor as
/// little-endian float32 in manifest order. All integers little-endian.
void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws CheckpointError on bad magic, unsupported version, truncation,
/// trailing bytes, a manifest that disagrees with the config, or a vocabulary
/// whose size differs from config.vocab_size.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace matra
