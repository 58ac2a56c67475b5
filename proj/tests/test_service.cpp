#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "matra/error.hpp"
#include "matra/utf8.hpp"
#include "service_harness.hpp"
#include "trained.hpp"

using namespace matra;
using nlohmann::json;

namespace {

ServeConfig local_config() {
  ServeConfig c;
  c.port = 0;
  c.rate_limit = 1000;
  return c;
}

json post(httplib::Client& client, const std::string& path, const json& body, int& status) {
  auto res = client.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  status = res->status;
  return json::parse(res->body);
}

json transliterate(httplib::Client& client, const std::string& text, const std::string& from, const std::string& to,
                   int& status) {
  return post(client, "/transliterate", {{"text", text}, {"source_lang", from}, {"target_lang", to}}, status);
}

json annotation(const std::string& id, bool correct) {
  json j = {{"id", id},           {"source_lang", "english"}, {"target_lang", "hindi"},
            {"input", "KLM"},     {"prediction", "कलम"},      {"verdict", correct ? "correct" : "incorrect"},
            {"annotator", "test"}};
  if (!correct) j["reference"] = "कलम्";
  return j;
}

}  // namespace

TEST_CASE("rate limiter refills continuously") {
  auto now = std::chrono::steady_clock::time_point{};
  RateLimiter limiter(2, [&] { return now; });
  CHECK(limiter.allow("a"));
  CHECK(limiter.allow("a"));
  CHECK_FALSE(limiter.allow("a"));
  CHECK(limiter.allow("b"));
  now += std::chrono::seconds(30);
  CHECK(limiter.allow("a"));
  CHECK_FALSE(limiter.allow("a"));
  now += std::chrono::minutes(10);
  CHECK(limiter.allow("a"));
  CHECK(limiter.allow("a"));
  CHECK_FALSE(limiter.allow("a"));
}

TEST_CASE("serve configuration validation") {
  ServeConfig c;
  c.rate_limit = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.port = 70000;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.max_body_bytes = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("annotation store appends atomically and reloads") {
  const auto path = std::filesystem::temp_directory_path() / "matra_test_store.jsonl";
  std::filesystem::remove(path);
  {
    AnnotationStore store(path);
    CHECK(store.append({annotation_from_json(annotation("1", true))}) == 1);
    AnnotationRecord bad = annotation_from_json(annotation("2", false));
    bad.reference.reset();
    CHECK_THROWS_AS(store.append({annotation_from_json(annotation("3", true)), bad}), DataError);
    CHECK(store.size() == 1);
  }
  AnnotationStore reloaded(path);
  CHECK(reloaded.size() == 1);
  CHECK(reloaded.snapshot().front().id == "1");
  std::filesystem::remove(path);
}

TEST_CASE("HTTP contract") {
  testing::RunningService running(testing::memorized_checkpoint(), local_config());
  auto client = running.client();
  int status = 0;

  SUBCASE("health") {
    auto res = client.Get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    const json body = json::parse(res->body);
    CHECK(body["status"] == "ok");
    CHECK(body["model"]["embed_size"] == 32);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
  }

  SUBCASE("word transliteration") {
    const json body = transliterate(client, "klm", "english", "hindi", status);
    CHECK(status == 200);
    CHECK(body["output"] == utf8::encode(testing::spell(U"KLM", Language::hindi)));
    CHECK(body["flags"].empty());
    CHECK_FALSE(body.contains("intermediate"));
  }

  SUBCASE("sentences keep their word count and pivots report the intermediate") {
    const std::string text = utf8::encode(testing::spell(U"KLM", Language::tamil) + U" " +
                                          testing::spell(U"MRK", Language::tamil));
    const json body = transliterate(client, text, "tamil", "kannada", status);
    CHECK(status == 200);
    CHECK(body["words"].size() == 2);
    CHECK(utf8::split_words(utf8::decode(body["output"].get<std::string>())).size() == 2);
    CHECK(body["intermediate"] == "KLM MRK");
    CHECK(body["output"] == utf8::encode(testing::spell(U"KLM", Language::kannada) + U" " +
                                         testing::spell(U"MRK", Language::kannada)));
  }

  SUBCASE("unknown or identical languages are bad requests") {
    json body = transliterate(client, "KLM", "english", "french", status);
    CHECK(status == 400);
    CHECK(body["allowed"].size() == 5);
    body = transliterate(client, "KLM", "hindi", "hindi", status);
    CHECK(status == 400);
    body = post(client, "/transliterate", {{"text", 5}, {"source_lang", "english"}, {"target_lang", "hindi"}}, status);
    CHECK(status == 400);
    auto res = client.Post("/transliterate", "{not json", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
  }

  SUBCASE("script violations are unprocessable") {
    const json body = transliterate(client, "KLक", "english", "hindi", status);
    CHECK(status == 422);
    CHECK(body["character"] == "क");
    CHECK(body["codepoint"].get<std::string>().find("0915") != std::string::npos);
  }

  SUBCASE("oversized bodies are rejected") {
    const std::string text(70 * 1024, 'K');
    auto res = client.Post("/transliterate", json{{"text", text}, {"source_lang", "english"}, {"target_lang", "hindi"}}.dump(),
                           "application/json");
    REQUIRE(res);
    CHECK(res->status == 413);
  }

  SUBCASE("annotations feed the phonetic metric") {
    auto res = client.Get("/metrics/phonetic");
    REQUIRE(res);
    CHECK(json::parse(res->body)["phonetic_accuracy"].is_null());

    json records = json::array({annotation("a", true), annotation("b", true), annotation("c", false)});
    json body = post(client, "/annotations", records, status);
    CHECK(status == 201);
    CHECK(body["accepted"] == 3);
    auto one = client.Post("/annotations", annotation("d", true).dump() + "\n", "application/x-ndjson");
    REQUIRE(one);
    CHECK(one->status == 201);

    res = client.Get("/metrics/phonetic");
    REQUIRE(res);
    body = json::parse(res->body);
    CHECK(body["correct_sounding_count"] == 3);
    CHECK(body["total_count"] == 4);
    CHECK(body["phonetic_accuracy"] == 0.75);

    json missing = annotation("e", false);
    missing.erase("reference");
    body = post(client, "/annotations", json::array({missing}), status);
    CHECK(status == 400);
    CHECK(running.service().store().size() == 4);
  }

  SUBCASE("CORS preflight") {
    auto res = client.Options("/transliterate");
    REQUIRE(res);
    CHECK(res->status == 204);
    CHECK(res->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  }
}

TEST_CASE("requests beyond the rate limit get 429") {
  ServeConfig config = local_config();
  config.rate_limit = 2;
  config.cors_origin = "https://console.example";
  testing::RunningService running(testing::fresh_checkpoint(1), config);
  auto client = running.client();
  CHECK(client.Get("/health")->status == 200);
  CHECK(client.Get("/health")->status == 200);
  auto res = client.Get("/health");
  REQUIRE(res);
  CHECK(res->status == 429);
  CHECK(json::parse(res->body).contains("error"));
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "https://console.example");
}
