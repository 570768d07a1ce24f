#pragma once

// Chat-completion backend abstraction. The pipeline only ever sees
// ChatBackend; mock, replay and recording variants make every run
// reproducible without a network.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "targen/clock.hpp"
#include "targen/errors.hpp"
#include "targen/sha256.hpp"

namespace targen::backend {

using json = nlohmann::ordered_json;

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  int max_tokens = 1024;

  bool operator==(const ChatRequest&) const = default;

  std::vector<std::string> issues() const {
    std::vector<std::string> out;
    if (messages.empty()) out.push_back("messages empty");
    if (!messages.empty() && messages.back().role != "user")
      out.push_back("last message role must be user");
    for (const auto& m : messages)
      if (m.role != "system" && m.role != "user" && m.role != "assistant")
        out.push_back("unknown role '" + m.role + "'");
    if (temperature < 0) out.push_back("temperature negative");
    if (max_tokens <= 0) out.push_back("max_tokens must be positive");
    return out;
  }
};

enum class FinishReason { stop, length, other };

inline std::string finish_reason_name(FinishReason r) {
  switch (r) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    default: return "other";
  }
}

inline FinishReason finish_reason_from(const std::string& name) {
  if (name == "stop") return FinishReason::stop;
  if (name == "length") return FinishReason::length;
  return FinishReason::other;
}

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  bool operator==(const Usage&) const = default;
};

struct ChatResponse {
  std::string content;
  FinishReason finish_reason = FinishReason::stop;
  std::optional<Usage> usage;

  bool operator==(const ChatResponse&) const = default;
};

inline json request_to_json(const ChatRequest& r) {
  json messages = json::array();
  for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return json{{"model", r.model},
              {"messages", messages},
              {"temperature", r.temperature},
              {"max_tokens", r.max_tokens}};
}

inline ChatRequest request_from_json(const json& j) {
  ChatRequest r;
  r.model = j.at("model").get<std::string>();
  for (const auto& m : j.at("messages"))
    r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  r.temperature = j.at("temperature").get<double>();
  if (j.contains("max_tokens")) r.max_tokens = j.at("max_tokens").get<int>();
  return r;
}

inline json response_to_json(const ChatResponse& r) {
  json j{{"content", r.content}, {"finish_reason", finish_reason_name(r.finish_reason)}};
  if (r.usage)
    j["usage"] = {{"prompt_tokens", r.usage->prompt_tokens},
                  {"completion_tokens", r.usage->completion_tokens}};
  return j;
}

inline ChatResponse response_from_json(const json& j) {
  ChatResponse r;
  r.content = j.at("content").get<std::string>();
  r.finish_reason = finish_reason_from(j.at("finish_reason").get<std::string>());
  if (j.contains("usage")) {
    Usage u;
    u.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
    u.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
    r.usage = u;
  }
  return r;
}

// Hash input deliberately leaves out max_tokens so transcripts survive
// budget tweaks.
inline std::string canonical_request_text(const ChatRequest& r) {
  json messages = json::array();
  for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json canon{{"model", r.model}, {"messages", messages}, {"temperature", r.temperature}};
  return canon.dump();
}

inline std::string request_hash(const ChatRequest& r) {
  return sha256_hex(canonical_request_text(r));
}

struct TranscriptEntry {
  std::string hash;
  ChatRequest request;
  ChatResponse response;
};

class ChatTranscript {
 public:
  ChatTranscript() = default;
  ChatTranscript(ChatTranscript&& other) noexcept {
    std::lock_guard lock(other.mutex_);
    entries_ = std::move(other.entries_);
  }
  ChatTranscript& operator=(ChatTranscript&& other) noexcept {
    if (this != &other) {
      std::scoped_lock lock(mutex_, other.mutex_);
      entries_ = std::move(other.entries_);
    }
    return *this;
  }

  void append(const ChatRequest& request, const ChatResponse& response) {
    std::lock_guard lock(mutex_);
    entries_.push_back({request_hash(request), request, response});
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

  std::vector<TranscriptEntry> entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
  }

  std::optional<ChatResponse> find(const std::string& hash) const {
    std::lock_guard lock(mutex_);
    for (const auto& e : entries_)
      if (e.hash == hash) return e.response;
    return std::nullopt;
  }

  std::string to_jsonl() const {
    std::lock_guard lock(mutex_);
    std::string out;
    for (const auto& e : entries_) {
      json line{{"hash", e.hash},
                {"request", request_to_json(e.request)},
                {"response", response_to_json(e.response)}};
      out += line.dump();
      out += "\n";
    }
    return out;
  }

  static ChatTranscript from_jsonl(const std::string& text) {
    ChatTranscript t;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      std::string line = text.substr(pos, end - pos);
      pos = end + 1;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j = json::parse(line);
      TranscriptEntry e;
      e.hash = j.at("hash").get<std::string>();
      e.request = request_from_json(j.at("request"));
      e.response = response_from_json(j.at("response"));
      t.entries_.push_back(std::move(e));
    }
    return t;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write transcript file: " + path);
    out << to_jsonl();
  }

  static ChatTranscript load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read transcript file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_jsonl(text);
  }

 private:
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> entries_;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
  // Deterministic backends let the pipeline zero out timestamps so replayed
  // runs serialize byte-identically.
  virtual bool deterministic() const = 0;
};

// Scripted responses, served in order. A responder function can be supplied
// instead for tests that need request-dependent replies.
class MockBackend : public ChatBackend {
 public:
  explicit MockBackend(std::vector<std::string> script) {
    for (auto& s : script) script_.push_back(std::move(s));
  }

  explicit MockBackend(std::function<std::string(const ChatRequest&)> responder)
      : responder_(std::move(responder)) {}

  ChatResponse complete(const ChatRequest& request) override {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    ChatResponse r;
    if (responder_) {
      r.content = responder_(request);
      return r;
    }
    if (script_.empty())
      throw MockExhausted("mock script exhausted after " + std::to_string(requests_.size() - 1) +
                          " responses");
    r.content = std::move(script_.front());
    script_.pop_front();
    return r;
  }

  std::string id() const override { return "mock"; }
  bool deterministic() const override { return true; }

  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return requests_.size();
  }

  std::vector<ChatRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  mutable std::mutex mutex_;
  std::deque<std::string> script_;
  std::function<std::string(const ChatRequest&)> responder_;
  std::vector<ChatRequest> requests_;
};

// Passes through to an inner backend and appends every successful exchange
// to a transcript.
class RecordingBackend : public ChatBackend {
 public:
  RecordingBackend(ChatBackend& inner, ChatTranscript& transcript)
      : inner_(inner), transcript_(transcript) {}

  ChatResponse complete(const ChatRequest& request) override {
    ChatResponse response = inner_.complete(request);
    transcript_.append(request, response);
    return response;
  }

  std::string id() const override { return inner_.id(); }
  bool deterministic() const override { return inner_.deterministic(); }

 private:
  ChatBackend& inner_;
  ChatTranscript& transcript_;
};

// Answers only from a transcript; a request it has never seen is an error,
// never a network call.
class ReplayBackend : public ChatBackend {
 public:
  explicit ReplayBackend(ChatTranscript transcript) : transcript_(std::move(transcript)) {}

  ChatResponse complete(const ChatRequest& request) override {
    std::string hash = request_hash(request);
    if (auto r = transcript_.find(hash)) return *r;
    throw ReplayMiss(hash);
  }

  std::string id() const override { return "replay"; }
  bool deterministic() const override { return true; }

 private:
  ChatTranscript transcript_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};
  std::set<TransportErrorClass> retryable = {
      TransportErrorClass::rate_limited,
      TransportErrorClass::server_error,
      TransportErrorClass::timeout,
  };

  std::chrono::milliseconds backoff_for(int attempt) const {
    double ms = static_cast<double>(base_backoff.count());
    for (int i = 1; i < attempt; ++i) ms *= multiplier;
    double capped = std::min(ms, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
  }

  bool is_retryable(TransportErrorClass cls) const { return retryable.count(cls) > 0; }
};

// Sliding-window rate limit plus an in-flight cap. Waits go through the
// injected clock so tests can run on virtual time.
class RateLimiter {
 public:
  RateLimiter(int max_per_interval, std::chrono::milliseconds interval, int max_in_flight,
              Clock& clock = system_clock())
      : max_per_interval_(max_per_interval),
        interval_(interval),
        max_in_flight_(max_in_flight),
        clock_(clock) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    in_flight_cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    while (true) {
      auto now = clock_.now();
      while (!window_.empty() && now - window_.front() >= interval_) window_.pop_front();
      if (static_cast<int>(window_.size()) < max_per_interval_) break;
      auto wait = interval_ - (now - window_.front());
      lock.unlock();
      clock_.sleep_for(std::chrono::duration_cast<std::chrono::milliseconds>(wait));
      lock.lock();
    }
    window_.push_back(clock_.now());
    ++in_flight_;
  }

  void release() {
    std::lock_guard lock(mutex_);
    --in_flight_;
    in_flight_cv_.notify_one();
  }

  int in_flight() const {
    std::lock_guard lock(mutex_);
    return in_flight_;
  }

 private:
  int max_per_interval_;
  std::chrono::milliseconds interval_;
  int max_in_flight_;
  Clock& clock_;
  mutable std::mutex mutex_;
  std::condition_variable in_flight_cv_;
  std::deque<std::chrono::steady_clock::time_point> window_;
  int in_flight_ = 0;
};

// complete() under a retry policy and optional rate limiter. Non-retryable
// transport errors surface immediately; retryable ones are retried with
// exponential backoff and surface with attempt history once exhausted.
inline ChatResponse execute_with_policy(ChatBackend& backend, const ChatRequest& request,
                                        const RetryPolicy& policy, RateLimiter* limiter = nullptr,
                                        Clock& clock = system_clock()) {
  std::vector<std::string> history;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    if (limiter) limiter->acquire();
    try {
      ChatResponse r = backend.complete(request);
      if (limiter) limiter->release();
      return r;
    } catch (const TransportError& e) {
      if (limiter) limiter->release();
      history.push_back("attempt " + std::to_string(attempt) + ": " + e.what());
      if (!policy.is_retryable(e.error_class()) || attempt == policy.max_attempts) {
        std::string msg = e.what();
        if (history.size() > 1) {
          msg += " [";
          for (std::size_t i = 0; i < history.size(); ++i)
            msg += (i ? "; " : "") + history[i];
          msg += "]";
        }
        throw TransportError(e.error_class(), msg, e.http_status());
      }
      clock.sleep_for(policy.backoff_for(attempt));
    } catch (...) {
      if (limiter) limiter->release();
      throw;
    }
  }
  throw Error("unreachable: retry loop exited");
}

}  // namespace targen::backend
