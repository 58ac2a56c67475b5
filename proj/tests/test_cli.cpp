#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

class Workspace {
 public:
  Workspace() : root_(fs::temp_directory_path() / ("matra_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() { fs::remove_all(root_); }

  fs::path path(const std::string& name) const { return root_ / name; }

  void write(const std::string& name, std::string_view content) const {
    fs::create_directories(path(name).parent_path());
    std::ofstream(path(name), std::ios::binary) << content;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  Run run(const std::string& args) const {
    const fs::path log = path("last.log");
    const std::string cmd = "cd '" + root_.string() + "' && env -u MATRA_CHECKPOINT -u MATRA_PORT '" MATRA_CLI_PATH
                            "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read("last.log")};
  }

 private:
  fs::path root_;
};

constexpr std::string_view kToyModel = R"({"preset": "toy"})";
constexpr std::string_view kQuickTrain = R"({"batch_size": 6, "epochs": 3, "warmup_steps": 1, "peak_lr": 0.01, "seed": 5})";

}  // namespace

TEST_CASE("parse-corpus writes the merged TSV and is reproducible") {
  Workspace ws;
  ws.write("news/NEWS2018_M-EnTa_trn.xml", matra::testing::kNewsEnTaSmall);
  const Run first = ws.run("parse-corpus --input-dir news --out corpus.tsv");
  CAPTURE(first.output);
  REQUIRE(first.code == 0);
  const std::string tsv = ws.read("corpus.tsv");
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 6);
  CHECK(tsv.find("RAMA\tராமா\t<tamil>\t<english>\n") != std::string::npos);
  CHECK(tsv.find("ராமா\tRAMA\t<english>\t<tamil>\n") != std::string::npos);
  CHECK(fs::exists(ws.path("corpus.tsv.rejections.jsonl")));

  REQUIRE(ws.run("parse-corpus --input-dir news --out again.tsv").code == 0);
  CHECK(ws.read("again.tsv") == tsv);

  REQUIRE(ws.run("parse-corpus --input-dir news --out parts.tsv --split --seed 3").code == 0);
  std::size_t lines = 0;
  for (const char* part : {"parts.train.tsv", "parts.dev.tsv", "parts.test.tsv"}) {
    const std::string text = ws.read(part);
    lines += std::count(text.begin(), text.end(), '\n');
  }
  CHECK(lines == 6);
}

TEST_CASE("parse-corpus without usable files fails with a data error") {
  Workspace ws;
  fs::create_directories(ws.path("empty"));
  const Run r = ws.run("parse-corpus --input-dir empty --out corpus.tsv");
  CHECK(r.code == 2);
  CHECK_FALSE(r.output.empty());
  CHECK(ws.run("parse-corpus --out corpus.tsv").code == 1);
}

TEST_CASE("parse-corpus explicit pair for an unhinted file name") {
  Workspace ws;
  ws.write("news/names.xml", matra::testing::kNewsEnHi);
  CHECK(ws.run("parse-corpus --input-dir news --out corpus.tsv").code == 2);
  const Run r = ws.run("parse-corpus --input-dir news --out corpus.tsv --pair names.xml=english:hindi");
  CAPTURE(r.output);
  REQUIRE(r.code == 0);
  CHECK(ws.read("corpus.tsv") == matra::testing::kNewsEnHiMergedTsv);
}

TEST_CASE("train, transliterate, evaluate and annotation round trip") {
  Workspace ws;
  ws.write("news/NEWS2018_M-EnTa_trn.xml", matra::testing::kNewsEnTaSmall);
  REQUIRE(ws.run("parse-corpus --input-dir news --out corpus.tsv").code == 0);
  ws.write("model.json", kToyModel);
  ws.write("train.json", kQuickTrain);

  const Run trained =
      ws.run("train --corpus corpus.tsv --model-config model.json --train-config train.json --out m.matra");
  CAPTURE(trained.output);
  REQUIRE(trained.code == 0);
  CHECK(fs::exists(ws.path("m.matra")));
  std::istringstream history(ws.read("m.matra.history.jsonl"));
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(history, line)) CHECK(json::parse(line)["epoch"] == ++epochs);
  CHECK(epochs == 3);

  const Run word = ws.run("transliterate --checkpoint m.matra --from english --to tamil --json rama");
  CAPTURE(word.output);
  CHECK(word.code == 0);
  CHECK(json::parse(word.output).contains("output"));
  CHECK(ws.run("transliterate --checkpoint m.matra --from english --to klingon rama").code == 1);
  CHECK(ws.run("transliterate --checkpoint missing.matra --from english --to tamil rama").code == 2);

  const Run eval = ws.run("evaluate --checkpoint m.matra --test corpus.tsv --out report.json");
  CAPTURE(eval.output);
  REQUIRE(eval.code == 0);
  const json report = json::parse(ws.read("report.json"));
  CHECK(report["count"]["english"]["tamil"] == 3);
  CHECK(report.contains("top1"));
  CHECK(report.contains("cer_normalized"));

  const Run exported = ws.run("annotations-export --checkpoint m.matra --test corpus.tsv --out queue.jsonl --limit 4");
  REQUIRE(exported.code == 0);
  std::istringstream queue(ws.read("queue.jsonl"));
  std::string annotated;
  std::size_t items = 0;
  while (std::getline(queue, line)) {
    json j = json::parse(line);
    CHECK(j.contains("prediction"));
    j["prediction"] = "ராமா";
    j["verdict"] = items == 0 ? "incorrect" : "correct";
    if (items == 0) j["reference"] = "X";
    j["annotator"] = "cli-test";
    annotated += j.dump() + "\n";
    ++items;
  }
  CHECK(items == 4);
  ws.write("annotated.jsonl", annotated);
  const Run imported = ws.run("annotations-import --input annotated.jsonl --store store.jsonl");
  CAPTURE(imported.output);
  REQUIRE(imported.code == 0);
  CHECK(imported.output.find("0.75") != std::string::npos);

  const Run phonetic = ws.run("evaluate --checkpoint m.matra --annotations store.jsonl --out phonetic.json");
  REQUIRE(phonetic.code == 0);
  CHECK(json::parse(ws.read("phonetic.json"))["summary"]["phonetic_accuracy"] == 0.75);
}

TEST_CASE("configuration and mode errors") {
  Workspace ws;
  ws.write("news/NEWS2018_M-EnTa_trn.xml", matra::testing::kNewsEnTaSmall);
  REQUIRE(ws.run("parse-corpus --input-dir news --out corpus.tsv").code == 0);
  ws.write("model.json", R"({"preset": "toy", "embed_size": 30})");
  ws.write("train.json", kQuickTrain);
  const Run bad = ws.run("train --corpus corpus.tsv --model-config model.json --train-config train.json");
  CHECK(bad.code == 1);
  CHECK(bad.output.find("embed_size") != std::string::npos);

  ws.write("model.json", kToyModel);
  ws.write("typo.json", R"({"epoch": 3})");
  const Run typo = ws.run("train --corpus corpus.tsv --model-config model.json --train-config typo.json");
  CHECK(typo.code == 1);
  CHECK(typo.output.find("epoch") != std::string::npos);

  // English-source lines only: nothing is left for indic2eng.
  const std::string tsv = ws.read("corpus.tsv");
  std::string forward, line;
  for (std::istringstream in(tsv); std::getline(in, line);)
    if (line.size() >= 10 && line.compare(line.size() - 10, 10, "\t<english>") == 0) forward += line + "\n";
  ws.write("forward.tsv", forward);
  ws.write("i2e.json", R"({"batch_size": 6, "epochs": 2, "warmup_steps": 0, "mode": "indic2eng"})");
  const Run empty = ws.run("train --corpus forward.tsv --model-config model.json --train-config i2e.json");
  CAPTURE(empty.output);
  CHECK(empty.code == 2);
}
