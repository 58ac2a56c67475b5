#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "matra/checkpoint.hpp"
#include "matra/error.hpp"
#include "trained.hpp"

using namespace matra;

namespace {

Checkpoint briefly_trained() {
  TrainConfig c = testing::memorization_train_config();
  c.epochs = 2;
  c.warmup_steps = 2;
  return train(testing::synthetic_corpus(), ModelConfig::toy(0), c).checkpoint;
}

std::string serialized(const Checkpoint& ckpt) {
  std::ostringstream out;
  save_checkpoint(ckpt, out);
  return out.str();
}

Checkpoint load_bytes(const std::string& bytes) {
  std::istringstream in(bytes);
  return load_checkpoint(in);
}

void put_u32(std::string& bytes, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

}  // namespace

TEST_CASE("round trip preserves weights, vocabulary and logits bit for bit") {
  const Checkpoint ckpt = briefly_trained();
  const std::string bytes = serialized(ckpt);
  CHECK(bytes.compare(0, 4, "MATR") == 0);
  CHECK(bytes[4] == 1);

  const Checkpoint back = load_bytes(bytes);
  CHECK(back.params == ckpt.params);
  CHECK(back.vocab == ckpt.vocab);
  CHECK(back.config() == ckpt.config());
  CHECK(back.metadata.mode == ckpt.metadata.mode);
  CHECK(back.metadata.steps == ckpt.metadata.steps);
  CHECK(back.metadata.final_loss == ckpt.metadata.final_loss);

  const auto& triples = testing::synthetic_corpus().triples;
  for (std::size_t i = 0; i < triples.size(); i += 7) {
    const EncodedExample ex = encode_example(triples[i], ckpt.vocab, ckpt.config().max_seq_len);
    const nn::Tensor a = decode_logits(ckpt.params, encode(ckpt.params, ex.src_ids), ex.tgt_ids);
    const nn::Tensor b = decode_logits(back.params, encode(back.params, ex.src_ids), ex.tgt_ids);
    CHECK(a == b);
  }
  CHECK(serialized(back) == bytes);
}

TEST_CASE("fresh initialization survives a round trip unchanged") {
  const Checkpoint ckpt = testing::fresh_checkpoint(9);
  CHECK(load_bytes(serialized(ckpt)).params == ckpt.params);
}

TEST_CASE("file round trip") {
  const Checkpoint ckpt = testing::fresh_checkpoint(10);
  const auto path = std::filesystem::temp_directory_path() / "matra_test_checkpoint.matra";
  save_checkpoint(ckpt, path);
  CHECK(load_checkpoint(path).params == ckpt.params);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
}

TEST_CASE("damaged checkpoints are rejected") {
  const std::string bytes = serialized(testing::fresh_checkpoint(11));

  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(load_bytes(magic), CheckpointError);

  std::string version = bytes;
  put_u32(version, 4, 2);
  try {
    load_bytes(version);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("version 2") != std::string::npos);
  }

  CHECK_THROWS_AS(load_bytes(bytes.substr(0, 6)), CheckpointError);
  CHECK_THROWS_AS(load_bytes(bytes.substr(0, 40)), CheckpointError);
  CHECK_THROWS_AS(load_bytes(bytes.substr(0, bytes.size() - 1)), CheckpointError);
  CHECK_THROWS_AS(load_bytes(bytes + "x"), CheckpointError);
  CHECK_THROWS_AS(load_bytes(""), CheckpointError);

  std::string header = bytes;
  header[12] = '[';
  CHECK_THROWS_AS(load_bytes(header), CheckpointError);
}

TEST_CASE("header inconsistencies are rejected") {
  const std::string bytes = serialized(testing::fresh_checkpoint(12));
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  const std::string data = bytes.substr(12 + len);
  auto rebuild = [&](const nlohmann::json& header) {
    const std::string text = header.dump();
    std::string out = bytes.substr(0, 12) + text + data;
    put_u32(out, 8, static_cast<std::uint32_t>(text.size()));
    return out;
  };
  const auto header = nlohmann::json::parse(bytes.substr(12, len));
  CHECK_NOTHROW(load_bytes(rebuild(header)));

  auto vocab = header;
  vocab["vocab"].erase(vocab["vocab"].end() - 1);
  CHECK_THROWS_AS(load_bytes(rebuild(vocab)), CheckpointError);

  auto manifest = header;
  manifest["tensors"][0]["shape"] = {1, 1};
  CHECK_THROWS_AS(load_bytes(rebuild(manifest)), CheckpointError);

  auto config = header;
  config["config"]["heads"] = 3;
  CHECK_THROWS_AS(load_bytes(rebuild(config)), CheckpointError);
}

TEST_CASE("non-finite weights are rejected") {
  const std::string bytes = serialized(testing::fresh_checkpoint(13));
  std::string bad = bytes;
  put_u32(bad, bad.size() - 4, 0x7FC00000u);  // NaN in the last float
  CHECK_THROWS_AS(load_bytes(bad), CheckpointError);
}
