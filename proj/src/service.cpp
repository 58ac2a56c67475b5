#include "matra/service.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "matra/error.hpp"
#include "matra/inference.hpp"
#include "matra/utf8.hpp"

namespace matra {

using nlohmann::json;

void ServeConfig::validate() const {
  if (rate_limit < 1) throw ConfigError("rate_limit", "must be >= 1 request per minute");
  if (port < 0 || port > 65535) throw ConfigError("port", "must lie in [0, 65535]");
  if (max_body_bytes == 0) throw ConfigError("max_body_bytes", "must be >= 1");
}

// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(std::size_t per_minute, Clock clock)
    : capacity_(static_cast<double>(per_minute)), clock_(std::move(clock)) {
  if (per_minute < 1) throw ConfigError("rate_limit", "must be >= 1 request per minute");
}

bool RateLimiter::allow(const std::string& key) {
  const auto now = clock_();
  std::lock_guard lock(mutex_);
  auto [it, inserted] = buckets_.try_emplace(key, Bucket{capacity_, now});
  Bucket& b = it->second;
  if (!inserted) {
    const double elapsed = std::chrono::duration<double>(now - b.last).count();
    b.tokens = std::min(capacity_, b.tokens + elapsed * capacity_ / 60.0);
    b.last = now;
  }
  if (b.tokens < 1.0) return false;
  b.tokens -= 1.0;
  return true;
}

// ---------------------------------------------------------------------------

AnnotationStore::AnnotationStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  records_ = read_annotations(in);
}

std::size_t AnnotationStore::append(const std::vector<AnnotationRecord>& records) {
  for (const auto& r : records) r.validate();
  std::lock_guard lock(mutex_);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot open annotation store " + path_.string());
    write_annotations(out, records);
    out.flush();
    if (!out) throw Error("failed to append to annotation store " + path_.string());
  }
  records_.insert(records_.end(), records.begin(), records.end());
  return records.size();
}

std::vector<AnnotationRecord> AnnotationStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t AnnotationStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

// ---------------------------------------------------------------------------

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  reply(res, status, extra);
}

json allowed_languages() {
  json a = json::array();
  for (Language l : kAllLanguages) a.push_back(language_name(l));
  return a;
}

// Reads a language field; on failure writes the 400 response and returns nullopt.
std::optional<Language> language_field(const json& body, const char* key, httplib::Response& res) {
  if (!body.contains(key) || !body.at(key).is_string()) {
    reply_error(res, 400, std::string("field '") + key + "' must be a language name",
                {{"allowed", allowed_languages()}});
    return std::nullopt;
  }
  const std::string name = body.at(key).get<std::string>();
  auto lang = parse_language(name);
  if (!lang) reply_error(res, 400, "unknown language '" + name + "'", {{"allowed", allowed_languages()}});
  return lang;
}

std::vector<AnnotationRecord> parse_annotation_body(const std::string& body) {
  std::vector<AnnotationRecord> records;
  const auto first = body.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw DataError("empty annotation body");
  if (body[first] == '[') {
    json arr;
    try {
      arr = json::parse(body);
    } catch (const json::exception& e) {
      throw DataError(std::string("invalid JSON: ") + e.what());
    }
    for (const auto& item : arr) records.push_back(annotation_from_json(item));
  } else {
    std::istringstream in(body);
    try {
      records = read_annotations(in);
    } catch (const ParseError& e) {
      throw DataError(e.what());
    }
  }
  if (records.empty()) throw DataError("no annotation records in body");
  return records;
}

}  // namespace

TransliterationService::TransliterationService(Checkpoint checkpoint, ServeConfig config, RateLimiter::Clock clock)
    : checkpoint_(std::move(checkpoint)),
      config_(std::move(config)),
      limiter_((config_.validate(), config_.rate_limit), std::move(clock)),
      store_(config_.annotation_store) {}

TransliterationService::~TransliterationService() { stop(); }

void TransliterationService::attach(httplib::Server& server) {
  server.set_payload_max_length(config_.max_body_bytes);

  server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", config_.cors_origin);
    if (req.method == "OPTIONS") {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
      return httplib::Server::HandlerResponse::Handled;
    }
    if (!limiter_.allow(req.remote_addr)) {
      reply_error(res, 429, "rate limit of " + std::to_string(config_.rate_limit) + " requests per minute exceeded");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    const ModelConfig& c = checkpoint_.config();
    reply(res, 200,
          {{"status", "ok"},
           {"model",
            {{"num_encoder_layers", c.num_encoder_layers},
             {"num_decoder_layers", c.num_decoder_layers},
             {"embed_size", c.embed_size},
             {"heads", c.heads},
             {"hidden_dim", c.hidden_dim},
             {"max_seq_len", c.max_seq_len},
             {"vocab_size", c.vocab_size},
             {"mode", mode_name(checkpoint_.metadata.mode)}}}});
  });

  server.Post("/transliterate", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return reply_error(res, 400, "request body must be JSON");
    }
    if (!body.is_object() || !body.contains("text") || !body.at("text").is_string())
      return reply_error(res, 400, "field 'text' must be a string");
    auto source = language_field(body, "source_lang", res);
    if (!source) return;
    auto target = language_field(body, "target_lang", res);
    if (!target) return;
    if (*source == *target) return reply_error(res, 400, "source_lang and target_lang must differ");

    TransliterationResult result;
    try {
      result = transliterate_text(checkpoint_, {body.at("text").get<std::string>(), *source, *target});
    } catch (const ScriptError& e) {
      return reply_error(res, 422, e.what(),
                         {{"character", utf8::encode(e.offending())}, {"codepoint", utf8::describe(e.offending())}});
    } catch (const DataError& e) {
      return reply_error(res, 400, e.what());
    }

    json words = json::array();
    json flags = json::array();
    std::string intermediate;
    for (std::size_t i = 0; i < result.words.size(); ++i) {
      const WordResult& w = result.words[i];
      json word = {{"input", w.input}, {"output", w.output}, {"decode_lengths", w.decode_lengths}};
      if (w.intermediate) {
        word["intermediate"] = *w.intermediate;
        if (i) intermediate += ' ';
        intermediate += *w.intermediate;
      }
      words.push_back(std::move(word));
      if (!w.out_of_script.empty() || w.unknown_characters) {
        json chars = json::array();
        for (char32_t c : w.out_of_script) chars.push_back(utf8::encode(c));
        flags.push_back({{"word_index", i}, {"out_of_script", chars}, {"unknown_characters", w.unknown_characters}});
      }
    }
    json out = {{"output", result.output}, {"words", words}, {"flags", flags}};
    if (result.has_intermediate()) out["intermediate"] = intermediate;
    reply(res, 200, out);
  });

  server.Post("/annotations", [this](const httplib::Request& req, httplib::Response& res) {
    std::vector<AnnotationRecord> records;
    try {
      records = parse_annotation_body(req.body);
    } catch (const DataError& e) {
      return reply_error(res, 400, e.what());
    }
    try {
      reply(res, 201, {{"accepted", store_.append(records)}});
    } catch (const DataError& e) {
      reply_error(res, 400, e.what());
    } catch (const Error& e) {
      reply_error(res, 500, e.what());
    }
  });

  server.Get("/metrics/phonetic", [this](const httplib::Request&, httplib::Response& res) {
    const auto records = store_.snapshot();
    if (records.empty())
      return reply(res, 200, {{"correct_sounding_count", 0}, {"total_count", 0}, {"phonetic_accuracy", nullptr}});
    reply(res, 200, to_json(phonetic_accuracy(records)));
  });
}

bool TransliterationService::listen() {
  server_ = std::make_unique<httplib::Server>();
  attach(*server_);
  return server_->listen(config_.host, config_.port);
}

int TransliterationService::bind_ephemeral() {
  server_ = std::make_unique<httplib::Server>();
  attach(*server_);
  return server_->bind_to_any_port(config_.host);
}

bool TransliterationService::run() {
  if (!server_) throw Error("bind_ephemeral() must be called before run()");
  return server_->listen_after_bind();
}

void TransliterationService::stop() {
  if (server_) server_->stop();
}

}  // namespace matra
