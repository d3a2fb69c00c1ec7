// Copyright 2026 The iclb Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// HTTP client for a scoring server.
//
//   POST /v1/score    {"prompt", "candidates"} -> {"scores": [{"candidate", "logscore"}]}
//   POST /v1/logprobs {"text"}                 -> {"tokens": [...], "logprobs": [...]}
//   GET  /v1/health                            -> {"model"}
//
// Transport errors, 5xx and 429 are retried with exponential backoff up to
// the attempt budget; other non-2xx responses fail immediately.

#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "iclb/backend.hpp"
#include "iclb/error.hpp"
#include "json.hpp"

namespace iclb {

enum class ScoreReduction { sum, mean, first_token };

inline std::string_view to_string(ScoreReduction r) {
  switch (r) {
    case ScoreReduction::sum: return "sum";
    case ScoreReduction::mean: return "mean";
    case ScoreReduction::first_token: return "first_token";
  }
  return "?";
}

inline ScoreReduction score_reduction_from_string(std::string_view s) {
  if (s == "sum") return ScoreReduction::sum;
  if (s == "mean") return ScoreReduction::mean;
  if (s == "first_token") return ScoreReduction::first_token;
  throw ConfigError("unknown score reduction '" + std::string(s) + "'");
}

struct RemoteOptions {
  std::string endpoint;  // e.g. http://127.0.0.1:8000 or http://host/prefix
  std::optional<std::string> api_token;
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};
  std::size_t max_in_flight = 4;
  ScoreReduction reduction = ScoreReduction::sum;
};

inline std::optional<std::string> env_var(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

namespace detail {

// Splits "http://host:port/prefix" into the client origin and a path prefix.
inline std::pair<std::string, std::string> split_endpoint(std::string_view endpoint) {
  while (!endpoint.empty() && endpoint.back() == '/') endpoint.remove_suffix(1);
  const auto scheme = endpoint.find("://");
  const auto path_start =
      endpoint.find('/', scheme == std::string_view::npos ? 0 : scheme + 3);
  if (path_start == std::string_view::npos) return {std::string(endpoint), ""};
  return {std::string(endpoint.substr(0, path_start)), std::string(endpoint.substr(path_start))};
}

// Bounded number of concurrent holders.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}

  class Slot {
   public:
    explicit Slot(InFlightLimiter& l) : l_(l) { l_.acquire(); }
    ~Slot() { l_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    InFlightLimiter& l_;
  };

 private:
  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_use_ < limit_; });
    ++in_use_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      --in_use_;
    }
    cv_.notify_one();
  }

  std::size_t limit_;
  std::size_t in_use_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
};

// JSON-over-HTTP with the retry policy above. Shared by the scoring and
// translation clients.
class JsonHttpClient {
 public:
  JsonHttpClient(std::string endpoint, std::optional<std::string> token,
                 std::chrono::milliseconds timeout, int max_attempts,
                 std::chrono::milliseconds backoff)
      : token_(std::move(token)), timeout_(timeout), max_attempts_(max_attempts), backoff_(backoff) {
    if (endpoint.empty()) throw ConfigError("remote endpoint is not set");
    if (max_attempts_ < 1) throw ConfigError("max_attempts must be at least 1");
    std::tie(origin_, prefix_) = split_endpoint(endpoint);
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
    return request(path, &body);
  }
  nlohmann::json get(const std::string& path) const { return request(path, nullptr); }

  // Number of HTTP attempts made so far (for tests of the retry budget).
  std::size_t attempts() const {
    std::lock_guard lock(stats_mutex_);
    return attempts_;
  }

 private:
  nlohmann::json request(const std::string& path, const nlohmann::json* body) const {
    std::string last_error;
    bool last_was_timeout = false;
    auto delay = backoff_;
    for (int attempt = 1; attempt <= max_attempts_; ++attempt) {
      if (attempt > 1) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
      {
        std::lock_guard lock(stats_mutex_);
        ++attempts_;
      }
      httplib::Client client(origin_);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      if (token_) client.set_bearer_token_auth(*token_);

      const auto started = std::chrono::steady_clock::now();
      auto res = body ? client.Post(prefix_ + path, body->dump(), "application/json")
                      : client.Get(prefix_ + path);
      const auto elapsed = std::chrono::steady_clock::now() - started;

      if (!res) {
        const auto err = res.error();
        last_was_timeout = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && elapsed >= timeout_);
        last_error = origin_ + prefix_ + path + ": " + httplib::to_string(err);
        continue;
      }
      const int status = res->status;
      if (status >= 200 && status < 300) {
        try {
          return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error&) {
          throw ProtocolViolation(path + ": response is not JSON");
        }
      }
      const std::string detail = path + ": HTTP " + std::to_string(status) + error_message(res->body);
      if (status >= 500 || status == 429) {
        last_was_timeout = false;
        last_error = detail;
        continue;
      }
      throw ProtocolViolation(detail);
    }
    if (last_was_timeout) throw Timeout(last_error);
    throw BackendUnavailable(last_error + " (after " + std::to_string(max_attempts_) + " attempts)");
  }

  static std::string error_message(const std::string& body) {
    try {
      auto j = nlohmann::json::parse(body);
      if (j.is_object() && j.contains("error") && j["error"].is_string()) {
        return " (" + j["error"].get<std::string>() + ")";
      }
    } catch (const nlohmann::json::exception&) {
    }
    return {};
  }

  std::string origin_;
  std::string prefix_;
  std::optional<std::string> token_;
  std::chrono::milliseconds timeout_;
  int max_attempts_;
  std::chrono::milliseconds backoff_;
  mutable std::mutex stats_mutex_;
  mutable std::size_t attempts_ = 0;
};

}  // namespace detail

class RemoteBackend : public ScoringBackend {
 public:
  explicit RemoteBackend(RemoteOptions options)
      : options_(std::move(options)),
        http_(options_.endpoint, options_.api_token, options_.timeout, options_.max_attempts,
              options_.backoff),
        limiter_(options_.max_in_flight) {}

  Capabilities capabilities() const override { return {true, true}; }
  std::size_t max_in_flight() const override { return options_.max_in_flight; }

  // Queries /v1/health once and caches the reported model identifier.
  std::string model_name() override {
    std::lock_guard lock(model_mutex_);
    if (!model_) {
      detail::InFlightLimiter::Slot slot(limiter_);
      const auto j = http_.get("/v1/health");
      if (!j.is_object() || !j.contains("model") || !j["model"].is_string()) {
        throw ProtocolViolation("/v1/health: missing 'model'");
      }
      model_ = j["model"].get<std::string>();
    }
    return *model_;
  }

  std::size_t attempts() const { return http_.attempts(); }

 protected:
  std::vector<CandidateScore> do_score(const PromptString& prompt,
                                       std::span<const std::string> candidates) override {
    nlohmann::json body{{"prompt", prompt.text()},
                        {"candidates", std::vector<std::string>(candidates.begin(), candidates.end())}};
    if (options_.reduction != ScoreReduction::sum) body["reduction"] = to_string(options_.reduction);
    nlohmann::json j;
    {
      detail::InFlightLimiter::Slot slot(limiter_);
      j = http_.post("/v1/score", body);
    }
    if (!j.is_object() || !j.contains("scores") || !j["scores"].is_array()) {
      throw ProtocolViolation("/v1/score: missing 'scores' array");
    }
    std::vector<CandidateScore> out;
    for (const auto& s : j["scores"]) {
      if (!s.is_object() || !s.contains("candidate") || !s["candidate"].is_string() ||
          !s.contains("logscore") || !s["logscore"].is_number()) {
        throw ProtocolViolation("/v1/score: malformed score entry");
      }
      out.push_back({s["candidate"].get<std::string>(), s["logscore"].get<double>()});
    }
    return out;
  }

  std::vector<TokenLogprob> do_token_logprobs(std::string_view text) override {
    nlohmann::json j;
    {
      detail::InFlightLimiter::Slot slot(limiter_);
      j = http_.post("/v1/logprobs", {{"text", std::string(text)}});
    }
    if (!j.is_object() || !j.contains("tokens") || !j.contains("logprobs") ||
        !j["tokens"].is_array() || !j["logprobs"].is_array() ||
        j["tokens"].size() != j["logprobs"].size()) {
      throw ProtocolViolation("/v1/logprobs: 'tokens' and 'logprobs' must be equal-length arrays");
    }
    std::vector<TokenLogprob> out;
    for (std::size_t i = 0; i < j["tokens"].size(); ++i) {
      const auto& tok = j["tokens"][i];
      const auto& lp = j["logprobs"][i];
      if (!tok.is_string()) throw ProtocolViolation("/v1/logprobs: token is not a string");
      // The first token has no context; servers may send null for it.
      if (lp.is_null()) {
        out.push_back({tok.get<std::string>(), 0.0});
      } else if (lp.is_number()) {
        out.push_back({tok.get<std::string>(), lp.get<double>()});
      } else {
        throw ProtocolViolation("/v1/logprobs: logprob is not a number");
      }
    }
    return out;
  }

 private:
  RemoteOptions options_;
  detail::JsonHttpClient http_;
  detail::InFlightLimiter limiter_;
  std::mutex model_mutex_;
  std::optional<std::string> model_;
};

}  // namespace iclb
