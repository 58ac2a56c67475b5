#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "matra/checkpoint.hpp"
#include "matra/config_io.hpp"
#include "matra/corpus.hpp"
#include "matra/error.hpp"
#include "matra/inference.hpp"
#include "matra/metrics.hpp"
#include "matra/service.hpp"
#include "matra/training.hpp"
#include "matra/utf8.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace matra;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

json read_json_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(what, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(what, path.string() + ": " + e.what());
  }
}

Corpus read_corpus(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  return read_tsv(in, path.filename().string());
}

// ---------------------------------------------------------------------------
// parse-corpus

struct PairHint {
  Language source;
  Language target;
};

// Default NEWS naming: EnHi, EnBa, EnTa, EnKa anywhere in the file name.
const std::map<std::string, Language> kDefaultHints = {
    {"enhi", Language::hindi}, {"enba", Language::bengali}, {"enbn", Language::bengali},
    {"enta", Language::tamil}, {"enka", Language::kannada}, {"enkn", Language::kannada}};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<PairHint> hint_for(const fs::path& file, const std::map<std::string, PairHint>& explicit_hints) {
  if (auto it = explicit_hints.find(file.filename().string()); it != explicit_hints.end()) return it->second;
  const std::string name = lower(file.filename().string());
  for (const auto& [key, lang] : kDefaultHints)
    if (name.find(key) != std::string::npos) return PairHint{Language::english, lang};
  return std::nullopt;
}

std::map<std::string, PairHint> parse_pair_options(const std::vector<std::string>& pairs) {
  std::map<std::string, PairHint> hints;
  for (const auto& entry : pairs) {
    const auto eq = entry.rfind('=');
    const auto colon = entry.rfind(':');
    if (eq == std::string::npos || colon == std::string::npos || colon < eq)
      throw ConfigError("pair", "expected FILE=source:target, got '" + entry + "'");
    auto src = parse_language(entry.substr(eq + 1, colon - eq - 1));
    auto tgt = parse_language(entry.substr(colon + 1));
    if (!src || !tgt) throw ConfigError("pair", "languages must be one of " + allowed_language_names());
    hints[entry.substr(0, eq)] = {*src, *tgt};
  }
  return hints;
}

struct ParseCorpusArgs {
  fs::path input_dir;
  fs::path out = "corpus.tsv";
  fs::path report;
  bool strict = false;
  bool split = false;
  std::uint64_t seed = kDefaultSplitSeed;
  std::vector<std::string> pairs;
};

int run_parse_corpus(const ParseCorpusArgs& args) {
  if (!fs::is_directory(args.input_dir)) throw DataError("not a directory: " + args.input_dir.string());
  const auto hints = parse_pair_options(args.pairs);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(args.input_dir))
    if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".xml") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::vector<DirectionDataset> datasets;
  std::vector<Rejection> report;
  std::size_t raw = 0;
  for (const auto& file : files) {
    auto hint = hint_for(file, hints);
    if (!hint) {
      std::cerr << "skipping " << file.filename().string() << ": no language-pair hint\n";
      continue;
    }
    NewsParseResult parsed;
    try {
      parsed = parse_news_xml(read_file(file), hint->source, hint->target, {args.strict});
    } catch (const ParseError& e) {
      if (args.strict) throw;
      std::cerr << "skipping " << file.filename().string() << ": " << e.what() << "\n";
      continue;
    }
    raw += parsed.triples.size();
    CleanResult cleaned = clean_pairs(parsed.triples);
    report.insert(report.end(), cleaned.report.begin(), cleaned.report.end());
    datasets.push_back({hint->source, hint->target, std::move(cleaned.kept), file.filename().string()});
  }
  if (datasets.empty()) throw DataError("no parsable NEWS XML files in " + args.input_dir.string());

  Corpus merged = tag_and_merge(datasets);
  {
    auto out = open_out(args.out);
    write_tsv(out, merged);
  }
  const fs::path report_path = args.report.empty() ? fs::path(args.out.string() + ".rejections.jsonl") : args.report;
  {
    auto out = open_out(report_path);
    write_rejections(out, report);
  }
  if (args.split) {
    CorpusSplit parts = split_corpus(merged, args.seed);
    for (auto [suffix, part] : {std::pair{".train.tsv", &parts.train}, {".dev.tsv", &parts.dev}, {".test.tsv", &parts.test}}) {
      auto out = open_out(fs::path(args.out).replace_extension(suffix));
      write_tsv(out, *part);
    }
  }

  std::map<std::string, std::size_t> by_rule;
  for (const auto& r : report) ++by_rule[r.rule];
  std::cout << "files: " << datasets.size() << "\nraw pairs: " << raw << "\nmerged triples: " << merged.size() << "\n";
  for (const auto& [rule_id, n] : by_rule) std::cout << "  " << rule_id << ": " << n << "\n";
  std::cout << "wrote " << args.out.string() << " and " << report_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  fs::path corpus;
  fs::path model_config;
  fs::path train_config;
  fs::path out = "model.matra";
  fs::path history;
  fs::path dev;
};

int run_train(const TrainArgs& args) {
  ModelConfig model_config = args.model_config.empty() ? ModelConfig{} : model_config_from_json(read_json_file(args.model_config, "model_config"));
  TrainConfig train_config =
      args.train_config.empty() ? TrainConfig::paper_preset() : train_config_from_json(read_json_file(args.train_config, "train_config"));

  Corpus corpus = read_corpus(args.corpus);
  Corpus dev;
  TrainOptions options;
  if (!args.dev.empty()) {
    dev = filter_by_mode(read_corpus(args.dev), train_config.mode);
    options.dev = &dev;
  }
  options.on_epoch = [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " loss " << r.mean_loss;
    if (r.dev_top1) std::cout << " dev_top1 " << *r.dev_top1;
    std::cout << std::endl;
  };
  TrainResult result = train(corpus, model_config, train_config, options);
  save_checkpoint(result.checkpoint, args.out);
  const fs::path history_path = args.history.empty() ? fs::path(args.out.string() + ".history.jsonl") : args.history;
  {
    auto out = open_out(history_path);
    write_history(out, result.history);
  }
  if (result.rejected_examples) std::cout << "skipped " << result.rejected_examples << " over-length triples\n";
  std::cout << "steps " << result.checkpoint.metadata.steps << ", wrote " << args.out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  fs::path checkpoint;
  fs::path test;
  fs::path annotations;
  fs::path out;
};

int run_evaluate(const EvaluateArgs& args) {
  if (args.test.empty() == args.annotations.empty()) throw ConfigError("test", "give exactly one of --test or --annotations");
  json report;
  if (!args.test.empty()) {
    if (args.checkpoint.empty()) throw ConfigError("checkpoint", "required with --test");
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const Corpus test = read_corpus(args.test);
    if (test.empty()) throw DataError("empty test set " + args.test.string());
    std::vector<ScoredPair> pairs;
    pairs.reserve(test.size());
    for (const auto& t : test.triples)
      pairs.push_back({t.source_lang, t.target_lang, decode_word(ckpt, t.source, t.target_lang), t.target});
    report = to_json(score_pairs(pairs));
  } else {
    std::ifstream in(args.annotations);
    if (!in) throw DataError("cannot read " + args.annotations.string());
    std::vector<AnnotationRecord> records;
    try {
      records = read_annotations(in);
    } catch (const ParseError& e) {
      throw DataError(e.what());
    }
    if (records.empty()) throw DataError("no annotation records in " + args.annotations.string());
    report = to_json(reference_metrics(records));
    report["summary"] = to_json(phonetic_accuracy(records));
  }
  const std::string text = report.dump(2) + "\n";
  if (args.out.empty()) {
    std::cout << text;
  } else {
    auto out = open_out(args.out);
    out << text;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// transliterate

struct TransliterateArgs {
  fs::path checkpoint;
  std::string from;
  std::string to;
  std::vector<std::string> text;
  bool json_output = false;
};

Language language_arg(const std::string& name, const std::string& field) {
  auto lang = parse_language(name);
  if (!lang) throw ConfigError(field, "unknown language '" + name + "'; allowed: " + allowed_language_names());
  return *lang;
}

fs::path checkpoint_path(const fs::path& flag) {
  if (const char* env = std::getenv("MATRA_CHECKPOINT"); env && *env) return env;
  if (flag.empty()) throw ConfigError("checkpoint", "required (flag or MATRA_CHECKPOINT)");
  return flag;
}

int run_transliterate(const TransliterateArgs& args) {
  const Language source = language_arg(args.from, "from");
  const Language target = language_arg(args.to, "to");
  const Checkpoint ckpt = load_checkpoint(checkpoint_path(args.checkpoint));
  std::string text;
  for (const auto& part : args.text) text += (text.empty() ? "" : " ") + part;
  const TransliterationResult result = transliterate_text(ckpt, {text, source, target});
  if (args.json_output) {
    json words = json::array();
    for (const auto& w : result.words) {
      json word = {{"input", w.input}, {"output", w.output}};
      if (w.intermediate) word["intermediate"] = *w.intermediate;
      words.push_back(word);
    }
    std::cout << json{{"output", result.output}, {"words", words}}.dump() << "\n";
  } else {
    std::cout << result.output << "\n";
    if (result.has_intermediate()) {
      std::string via;
      for (const auto& w : result.words) via += (via.empty() ? "" : " ") + *w.intermediate;
      std::cerr << "via english: " << via << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// serve

TransliterationService* g_service = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
}

int run_serve(ServeConfig config) {
  config.checkpoint = checkpoint_path(config.checkpoint);
  if (const char* env = std::getenv("MATRA_PORT"); env && *env) {
    try {
      config.port = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError("MATRA_PORT", std::string("not a port number: ") + env);
    }
  }
  config.validate();
  TransliterationService service(load_checkpoint(config.checkpoint), config);
  g_service = &service;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::cout << "serving on " << config.host << ":" << config.port << std::endl;
  const bool ok = service.listen();
  g_service = nullptr;
  if (!ok) {
    std::cerr << "error: cannot bind " << config.host << ":" << config.port << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// annotations

struct ExportArgs {
  fs::path checkpoint;
  fs::path test;
  fs::path out;
  std::size_t limit = 0;
};

// Prediction queue for annotators: one JSON object per line with everything
// but the verdict and reference.
int run_annotations_export(const ExportArgs& args) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path(args.checkpoint));
  const Corpus test = read_corpus(args.test);
  if (test.empty()) throw DataError("empty test set " + args.test.string());
  auto out = open_out(args.out);
  std::size_t n = 0;
  for (const auto& t : test.triples) {
    if (args.limit && n == args.limit) break;
    json item = {{"id", std::to_string(n)},
                 {"source_lang", language_name(t.source_lang)},
                 {"target_lang", language_name(t.target_lang)},
                 {"input", utf8::encode(t.source)},
                 {"prediction", utf8::encode(decode_word(ckpt, t.source, t.target_lang))}};
    out << item.dump() << "\n";
    ++n;
  }
  std::cout << "exported " << n << " predictions to " << args.out.string() << "\n";
  return kExitOk;
}

struct ImportArgs {
  fs::path input;
  fs::path store;
};

int run_annotations_import(const ImportArgs& args) {
  std::ifstream in(args.input);
  if (!in) throw DataError("cannot read " + args.input.string());
  std::vector<AnnotationRecord> records;
  try {
    records = read_annotations(in);
  } catch (const ParseError& e) {
    throw DataError(e.what());
  }
  if (records.empty()) throw DataError("no annotation records in " + args.input.string());
  AnnotationStore store(args.store);
  const std::size_t accepted = store.append(records);
  const AnnotationSummary summary = phonetic_accuracy(store.snapshot());
  std::cout << "accepted " << accepted << ", store now holds " << summary.total_count
            << ", phonetic accuracy " << summary.phonetic_accuracy << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matra: multilingual character-level transliteration"};
  app.require_subcommand(1);

  ParseCorpusArgs parse_args;
  auto* parse_cmd = app.add_subcommand("parse-corpus", "Parse, clean, tag and merge NEWS XML files into a TSV corpus");
  parse_cmd->add_option("--input-dir", parse_args.input_dir, "Directory of NEWS XML files")->required();
  parse_cmd->add_option("--out", parse_args.out, "Merged TSV output");
  parse_cmd->add_option("--report", parse_args.report, "Rejection report (JSON lines)");
  parse_cmd->add_option("--pair", parse_args.pairs, "Explicit language pair, FILE=source:target");
  parse_cmd->add_flag("--strict", parse_args.strict, "Fail on malformed or unexpected XML");
  parse_cmd->add_flag("--split", parse_args.split, "Also write .train/.dev/.test TSV files");
  parse_cmd->add_option("--seed", parse_args.seed, "Split seed");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a TSV corpus");
  train_cmd->add_option("--corpus", train_args.corpus, "Training TSV")->required();
  train_cmd->add_option("--model-config", train_args.model_config, "Model config JSON");
  train_cmd->add_option("--train-config", train_args.train_config, "Training config JSON");
  train_cmd->add_option("--out", train_args.out, "Checkpoint output");
  train_cmd->add_option("--history", train_args.history, "Per-epoch history (JSON lines)");
  train_cmd->add_option("--dev", train_args.dev, "Dev TSV for per-epoch top-1");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a test TSV, or score annotations");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file");
  eval_cmd->add_option("--test", eval_args.test, "Test TSV");
  eval_cmd->add_option("--annotations", eval_args.annotations, "Annotation JSON lines");
  eval_cmd->add_option("--out", eval_args.out, "Report JSON (stdout when omitted)");

  TransliterateArgs tr_args;
  auto* tr_cmd = app.add_subcommand("transliterate", "Transliterate a word or sentence");
  tr_cmd->add_option("--from", tr_args.from, "Source language")->required();
  tr_cmd->add_option("--to", tr_args.to, "Target language")->required();
  tr_cmd->add_option("--checkpoint", tr_args.checkpoint, "Checkpoint file");
  tr_cmd->add_flag("--json", tr_args.json_output, "Print JSON");
  tr_cmd->add_option("text", tr_args.text, "Input text")->required();

  ServeConfig serve_config;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--checkpoint", serve_config.checkpoint, "Checkpoint file");
  serve_cmd->add_option("--host", serve_config.host, "Bind address");
  serve_cmd->add_option("--port", serve_config.port, "Port");
  serve_cmd->add_option("--rate-limit", serve_config.rate_limit, "Requests per minute per client");
  serve_cmd->add_option("--max-body", serve_config.max_body_bytes, "Maximum request body in bytes");
  serve_cmd->add_option("--store", serve_config.annotation_store, "Annotation store (JSON lines)");
  serve_cmd->add_option("--cors-origin", serve_config.cors_origin, "Access-Control-Allow-Origin value");

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("annotations-export", "Write a prediction queue for annotators");
  export_cmd->add_option("--checkpoint", export_args.checkpoint, "Checkpoint file");
  export_cmd->add_option("--test", export_args.test, "Source TSV")->required();
  export_cmd->add_option("--out", export_args.out, "Queue output (JSON lines)")->required();
  export_cmd->add_option("--limit", export_args.limit, "Maximum number of items");

  ImportArgs import_args;
  auto* import_cmd = app.add_subcommand("annotations-import", "Validate annotations and append them to a store");
  import_cmd->add_option("--input", import_args.input, "Annotation JSON lines")->required();
  import_cmd->add_option("--store", import_args.store, "Store file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*parse_cmd) return run_parse_corpus(parse_args);
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_evaluate(eval_args);
    if (*tr_cmd) return run_transliterate(tr_args);
    if (*serve_cmd) return run_serve(serve_config);
    if (*export_cmd) return run_annotations_export(export_args);
    if (*import_cmd) return run_annotations_import(import_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}
