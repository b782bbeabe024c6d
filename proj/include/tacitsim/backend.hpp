#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// Chat-completion plumbing: message types, backend interface, the live
// OpenAI-compatible HTTP client, and JSONL transcript logging. The scripted
// deterministic backend lives in scripted.hpp.
// ---------------------------------------------------------------------------

enum class Role { kSystem, kUser, kAssistant };

inline std::string role_name(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;
};

inline ChatMessage system_msg(std::string content) { return {Role::kSystem, std::move(content)}; }
inline ChatMessage user_msg(std::string content) { return {Role::kUser, std::move(content)}; }
inline ChatMessage assistant_msg(std::string content) {
  return {Role::kAssistant, std::move(content)};
}

enum class BackendKind { kLive, kScripted };

struct BackendConfig {
  BackendKind kind = BackendKind::kScripted;
  std::string endpoint_url = "https://api.openai.com/v1";  // live only
  std::string model_name = "gpt-4o-mini";                  // live only
  double temperature = 0.7;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  std::uint64_t rng_seed = 0;  // scripted only
};

struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Transient failures that survived the whole retry budget.
struct TransportError : BackendError {
  TransportError(const std::string& what, int attempts_made)
      : BackendError(what), attempts(attempts_made) {}
  int attempts = 0;
};

/// Terminal HTTP failure (non-retryable status).
struct ApiError : BackendError {
  ApiError(const std::string& what, int http_status) : BackendError(what), status(http_status) {}
  int status = 0;
};

/// Scripted backend received a system prompt with an unknown #role tag.
struct RoutingError : BackendError {
  using BackendError::BackendError;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

/// Extracts the value of a `#key:` header line from a prompt, or "".
inline std::string prompt_header(const std::string& content, const std::string& key) {
  const std::string prefix = "#" + key + ":";
  for (const std::string& raw : split_lines(content)) {
    const std::string line = trim(raw);
    if (starts_with(line, prefix)) return trim(line.substr(prefix.size()));
  }
  return "";
}

/// All `#key:` header values, in order of appearance.
inline std::vector<std::string> prompt_headers(const std::string& content, const std::string& key) {
  std::vector<std::string> out;
  const std::string prefix = "#" + key + ":";
  for (const std::string& raw : split_lines(content)) {
    const std::string line = trim(raw);
    if (starts_with(line, prefix)) out.push_back(trim(line.substr(prefix.size())));
  }
  return out;
}

inline std::string role_tag_of(const std::vector<ChatMessage>& messages) {
  for (const auto& m : messages) {
    if (m.role == Role::kSystem) {
      std::string tag = prompt_header(m.content, "role");
      if (!tag.empty()) return tag;
    }
  }
  return "";
}

// ---------------------------------------------------------------------------
// Live backend: one OpenAI-compatible chat-completions round trip with
// exponential backoff on transient failures (connect errors, 429, 5xx).
// ---------------------------------------------------------------------------

class LiveBackend : public ChatBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit LiveBackend(BackendConfig config, Sleeper sleeper = nullptr)
      : config_(std::move(config)), sleeper_(std::move(sleeper)) {
    if (const char* env = std::getenv("TACITSIM_ENDPOINT"); env && *env) {
      config_.endpoint_url = env;
    }
    if (const char* env = std::getenv("TACITSIM_API_KEY"); env && *env) {
      api_key_ = env;
    }
    if (!sleeper_) {
      sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
  }

  std::string complete(const std::vector<ChatMessage>& messages) override {
    if (messages.empty()) throw BackendError("complete() requires at least one message");

    nlohmann::json body;
    body["model"] = config_.model_name;
    body["temperature"] = config_.temperature;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : messages) {
      body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    const std::string payload = body.dump();

    auto [base, path_prefix] = split_endpoint(config_.endpoint_url);
    const std::string path = path_prefix + "/chat/completions";

    std::string last_failure = "no attempt made";
    const int total_attempts = config_.max_retries + 1;
    for (int attempt = 0; attempt < total_attempts; ++attempt) {
      if (attempt > 0) sleeper_(backoff_delay(attempt));

      httplib::Client client(base);
      client.set_connection_timeout(timeout_sec(), timeout_usec());
      client.set_read_timeout(timeout_sec(), timeout_usec());
      client.set_write_timeout(timeout_sec(), timeout_usec());
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

      auto res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        last_failure = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_failure = "retryable status " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw ApiError("chat completion failed with status " + std::to_string(res->status) + ": " +
                           res->body,
                       res->status);
      }
      return extract_reply(res->body);
    }
    throw TransportError("chat completion failed after " + std::to_string(total_attempts) +
                             " attempts: " + last_failure,
                         total_attempts);
  }

  /// Delay before retry `attempt` (attempt >= 1); monotone non-decreasing.
  static std::chrono::milliseconds backoff_delay(int attempt) {
    const long ms = 500L << std::min(attempt - 1, 4);
    return std::chrono::milliseconds(std::min(ms, 8000L));
  }

 private:
  static std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    std::size_t scheme_end = url.find("://");
    std::size_t host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    std::size_t path_begin = url.find('/', host_begin);
    if (path_begin == std::string::npos) return {url, ""};
    std::string path = url.substr(path_begin);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, path_begin), path};
  }

  static std::string extract_reply(const std::string& body) {
    nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty()) {
      throw BackendError("malformed chat completion response: " + body.substr(0, 200));
    }
    return doc["choices"][0]["message"]["content"].get<std::string>();
  }

  time_t timeout_sec() const { return static_cast<time_t>(config_.timeout_seconds); }
  long timeout_usec() const {
    return static_cast<long>((config_.timeout_seconds - static_cast<double>(timeout_sec())) * 1e6);
  }

  BackendConfig config_;
  Sleeper sleeper_;
  std::string api_key_;
};

// ---------------------------------------------------------------------------
// Transcript logging: every request/response pair is appended to a JSONL
// file before the reply is returned to the caller.
// ---------------------------------------------------------------------------

class TranscriptLogger : public ChatBackend {
 public:
  TranscriptLogger(std::shared_ptr<ChatBackend> inner, std::filesystem::path log_path,
                   std::string run_id)
      : inner_(std::move(inner)), log_path_(std::move(log_path)), run_id_(std::move(run_id)) {
    if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  }

  std::string complete(const std::vector<ChatMessage>& messages) override {
    const auto t0 = std::chrono::steady_clock::now();
    std::string reply = inner_->complete(messages);
    const auto t1 = std::chrono::steady_clock::now();
    const long latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();

    nlohmann::json entry;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      entry["run_id"] = run_id_;
      entry["call_index"] = call_index_++;
      entry["role_tag"] = role_tag_of(messages);
      entry["messages"] = nlohmann::json::array();
      for (const auto& m : messages) {
        entry["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
      }
      entry["reply"] = reply;
      entry["latency_ms"] = latency;
      std::ofstream out(log_path_, std::ios::app | std::ios::binary);
      out << entry.dump() << "\n";
    }
    return reply;
  }

  int calls_made() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return call_index_;
  }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::filesystem::path log_path_;
  std::string run_id_;
  mutable std::mutex mutex_;
  int call_index_ = 0;
};

}  // namespace tacitsim
