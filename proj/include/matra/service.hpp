#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "matra/checkpoint.hpp"
#include "matra/metrics.hpp"

namespace httplib {
class Server;
}

namespace matra {

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path checkpoint;
  /// Requests per minute per client address.
  std::size_t rate_limit = 60;
  std::size_t max_body_bytes = 64 * 1024;
  /// Append-only JSON-lines store; empty keeps annotations in memory only.
  std::filesystem::path annotation_store;
  std::string cors_origin = "*";

  void validate() const;
};

/// Token bucket per client key: capacity `per_minute`, refilled continuously
/// at per_minute / 60 tokens per second.
class RateLimiter {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  explicit RateLimiter(std::size_t per_minute, Clock clock = std::chrono::steady_clock::now);

  /// Takes one token for `key`; false when the bucket is empty.
  bool allow(const std::string& key);

 private:
  struct Bucket {
    double tokens;
    std::chrono::steady_clock::time_point last;
  };
  double capacity_;
  Clock clock_;
  std::mutex mutex_;
  std::map<std::string, Bucket> buckets_;
};

/// Annotation records, optionally mirrored to a JSON-lines file that is only
/// ever appended to. Existing file contents are loaded on construction.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path path = {});

  /// Validates every record first; nothing is stored if any is invalid.
  std::size_t append(const std::vector<AnnotationRecord>& records);
  std::vector<AnnotationRecord> snapshot() const;
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<AnnotationRecord> records_;
};

/// HTTP front end over an immutable checkpoint:
///   GET  /health             -> 200 {status, model}
///   POST /transliterate      -> 200 {output, words, flags[, intermediate]}
///   POST /annotations        -> 201 {accepted}
///   GET  /metrics/phonetic   -> 200 {correct_sounding_count, total_count, phonetic_accuracy}
/// Errors: 400 bad request or unknown language, 422 script violation,
/// 429 rate limit, 413 oversized body.
class TransliterationService {
 public:
  TransliterationService(Checkpoint checkpoint, ServeConfig config,
                         RateLimiter::Clock clock = std::chrono::steady_clock::now);
  ~TransliterationService();

  /// Installs routes, limits and CORS handling on `server`.
  void attach(httplib::Server& server);

  /// Binds and serves until stop(); blocks.
  bool listen();
  /// Binds to an ephemeral port on config.host and returns it; serve with run().
  int bind_ephemeral();
  bool run();
  void stop();

  const Checkpoint& checkpoint() const noexcept { return checkpoint_; }
  AnnotationStore& store() noexcept { return store_; }

 private:
  Checkpoint checkpoint_;
  ServeConfig config_;
  RateLimiter limiter_;
  AnnotationStore store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace matra
