#include <cstdio>

#include "catch2/catch_amalgamated.hpp"
#include "targen/backend.hpp"
#include "targen/backend_http.hpp"

using namespace targen;
using namespace targen::backend;

namespace {

ChatRequest simple_request(const std::string& text = "List two places.") {
  ChatRequest r;
  r.model = "test-model";
  r.messages = {{"user", text}};
  return r;
}

std::string ok_payload(const std::string& content, const std::string& finish = "stop") {
  json j{{"choices", json::array({json{{"message", json{{"content", content}}},
                                       {"finish_reason", finish}}})},
         {"usage", json{{"prompt_tokens", 12}, {"completion_tokens", 34}}}};
  return j.dump();
}

}  // namespace

TEST_CASE("mock backend serves its script in order", "[backend]") {
  MockBackend mock({"1. a restaurant\n2. a museum"});
  auto response = mock.complete(simple_request());
  REQUIRE(response.content == "1. a restaurant\n2. a museum");
  REQUIRE(response.finish_reason == FinishReason::stop);
  REQUIRE(mock.calls() == 1);

  SECTION("an exhausted script is a hard error") {
    REQUIRE_THROWS_AS(mock.complete(simple_request()), MockExhausted);
  }
}

TEST_CASE("mock backend responder variant answers from the request", "[backend]") {
  MockBackend mock{std::function<std::string(const ChatRequest&)>(
      [](const ChatRequest& r) { return "echo: " + r.messages.back().content; })};
  REQUIRE(mock.complete(simple_request("hi")).content == "echo: hi");
  REQUIRE(mock.complete(simple_request("bye")).content == "echo: bye");
  REQUIRE(mock.calls() == 2);
}

TEST_CASE("request hashing is stable and content-sensitive", "[backend]") {
  ChatRequest a = simple_request();
  ChatRequest b = simple_request();
  REQUIRE(request_hash(a) == request_hash(b));

  b.messages.back().content += "!";
  REQUIRE(request_hash(a) != request_hash(b));

  SECTION("model and temperature feed the hash") {
    ChatRequest c = simple_request();
    c.model = "other-model";
    REQUIRE(request_hash(a) != request_hash(c));
    ChatRequest d = simple_request();
    d.temperature = 0.0;
    REQUIRE(request_hash(a) != request_hash(d));
  }

  SECTION("max_tokens does not feed the hash") {
    ChatRequest c = simple_request();
    c.max_tokens = a.max_tokens * 2;
    REQUIRE(request_hash(a) == request_hash(c));
  }
}

TEST_CASE("recording fills a transcript entry per successful call", "[backend]") {
  MockBackend mock({"one", "two", "three"});
  ChatTranscript transcript;
  RecordingBackend recorder(mock, transcript);
  recorder.complete(simple_request("a"));
  recorder.complete(simple_request("b"));
  recorder.complete(simple_request("c"));
  REQUIRE(transcript.size() == 3);
  REQUIRE(transcript.entries()[1].response.content == "two");
  REQUIRE(transcript.entries()[1].hash == request_hash(simple_request("b")));

  SECTION("failed calls leave no entry") {
    REQUIRE_THROWS_AS(recorder.complete(simple_request("d")), MockExhausted);
    REQUIRE(transcript.size() == 3);
  }
}

TEST_CASE("replay answers recorded requests without a live backend", "[backend]") {
  ChatTranscript transcript;
  {
    MockBackend mock({"recorded answer"});
    RecordingBackend recorder(mock, transcript);
    recorder.complete(simple_request());
  }
  ReplayBackend replay(std::move(transcript));
  REQUIRE(replay.complete(simple_request()).content == "recorded answer");
  REQUIRE(replay.deterministic());

  SECTION("an unseen request is a replay miss carrying the hash") {
    try {
      replay.complete(simple_request("never recorded"));
      FAIL("expected ReplayMiss");
    } catch (const ReplayMiss& e) {
      REQUIRE(e.request_hash() == request_hash(simple_request("never recorded")));
    }
  }

  SECTION("a bigger max_tokens still replays") {
    ChatRequest r = simple_request();
    r.max_tokens = 9999;
    REQUIRE(replay.complete(r).content == "recorded answer");
  }
}

TEST_CASE("transcripts round-trip through JSONL", "[backend]") {
  ChatTranscript transcript;
  ChatRequest r = simple_request();
  ChatResponse resp;
  resp.content = "line one\nline two";
  resp.finish_reason = FinishReason::length;
  resp.usage = Usage{7, 9};
  transcript.append(r, resp);

  std::string jsonl = transcript.to_jsonl();
  REQUIRE(jsonl.find("\"hash\"") != std::string::npos);
  auto loaded = ChatTranscript::from_jsonl(jsonl);
  REQUIRE(loaded.size() == 1);
  REQUIRE(loaded.entries()[0].hash == request_hash(r));
  REQUIRE(loaded.entries()[0].response == resp);
  REQUIRE(loaded.entries()[0].request == r);

  SECTION("file save and load") {
    std::string path = "transcript_roundtrip_test.jsonl";
    transcript.save(path);
    auto from_disk = ChatTranscript::load(path);
    REQUIRE(from_disk.to_jsonl() == jsonl);
    std::remove(path.c_str());
  }
}

TEST_CASE("retry policy retries rate limits with exponential backoff", "[backend]") {
  int calls = 0;
  HttpBackend backend("http://fake.test/v1/chat", "key",
                      [&](const std::string&, const auto&, const std::string&) -> HttpResult {
                        ++calls;
                        if (calls <= 2) return {429, "slow down"};
                        return {200, ok_payload("made it")};
                      });
  RetryPolicy policy;
  policy.max_attempts = 3;
  policy.base_backoff = std::chrono::milliseconds(500);
  policy.multiplier = 2.0;
  ManualClock clock;

  auto response = execute_with_policy(backend, simple_request(), policy, nullptr, clock);
  REQUIRE(response.content == "made it");
  REQUIRE(calls == 3);
  REQUIRE(clock.sleeps ==
          std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500),
                                                 std::chrono::milliseconds(1000)});
}

TEST_CASE("retry exhaustion surfaces the attempt history", "[backend]") {
  int calls = 0;
  HttpBackend backend("http://fake.test/v1/chat", "key",
                      [&](const std::string&, const auto&, const std::string&) -> HttpResult {
                        ++calls;
                        return {500, "boom"};
                      });
  RetryPolicy policy;
  policy.max_attempts = 3;
  ManualClock clock;
  try {
    execute_with_policy(backend, simple_request(), policy, nullptr, clock);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    REQUIRE(e.error_class() == TransportErrorClass::server_error);
    REQUIRE(std::string(e.what()).find("attempt 3") != std::string::npos);
  }
  REQUIRE(calls == 3);
  REQUIRE(clock.sleeps.size() == 2);
}

TEST_CASE("non-retryable errors fail on the first attempt", "[backend]") {
  int calls = 0;
  HttpBackend backend("http://fake.test/v1/chat", "bad-key",
                      [&](const std::string&, const auto&, const std::string&) -> HttpResult {
                        ++calls;
                        return {401, "who are you"};
                      });
  RetryPolicy policy;
  policy.max_attempts = 5;
  ManualClock clock;
  try {
    execute_with_policy(backend, simple_request(), policy, nullptr, clock);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    REQUIRE(e.error_class() == TransportErrorClass::auth);
  }
  REQUIRE(calls == 1);
  REQUIRE(clock.sleeps.empty());
}

TEST_CASE("backoff is capped at the policy ceiling", "[backend]") {
  RetryPolicy policy;
  policy.base_backoff = std::chrono::milliseconds(500);
  policy.multiplier = 10.0;
  policy.max_backoff = std::chrono::milliseconds(2000);
  REQUIRE(policy.backoff_for(1) == std::chrono::milliseconds(500));
  REQUIRE(policy.backoff_for(2) == std::chrono::milliseconds(2000));
  REQUIRE(policy.backoff_for(3) == std::chrono::milliseconds(2000));
}

TEST_CASE("rate limiter spreads requests across intervals", "[backend]") {
  ManualClock clock;
  RateLimiter limiter(5, std::chrono::seconds(1), 100, clock);
  MockBackend mock{std::function<std::string(const ChatRequest&)>(
      [](const ChatRequest&) { return "ok"; })};
  RetryPolicy policy;
  for (int i = 0; i < 10; ++i)
    execute_with_policy(mock, simple_request("q" + std::to_string(i)), policy, &limiter, clock);
  REQUIRE(mock.calls() == 10);
  REQUIRE(clock.total_slept() >= std::chrono::seconds(1));
  REQUIRE(limiter.in_flight() == 0);

  SECTION("requests within the limit never wait") {
    ManualClock fast;
    RateLimiter roomy(100, std::chrono::seconds(1), 100, fast);
    MockBackend quick{std::function<std::string(const ChatRequest&)>(
        [](const ChatRequest&) { return "ok"; })};
    for (int i = 0; i < 10; ++i)
      execute_with_policy(quick, simple_request("q" + std::to_string(i)), policy, &roomy, fast);
    REQUIRE(fast.total_slept() == std::chrono::milliseconds(0));
  }
}

TEST_CASE("http backend decodes completion payloads", "[backend]") {
  HttpBackend backend("http://fake.test/v1/chat", "key",
                      [&](const std::string& url, const auto& headers,
                          const std::string& body) -> HttpResult {
                        REQUIRE(url == "http://fake.test/v1/chat");
                        bool has_auth = false;
                        for (const auto& [k, v] : headers)
                          if (k == "Authorization" && v == "Bearer key") has_auth = true;
                        REQUIRE(has_auth);
                        json j = json::parse(body);
                        REQUIRE(j["model"] == "test-model");
                        REQUIRE(j["messages"][0]["role"] == "user");
                        REQUIRE(j.contains("max_tokens"));
                        return {200, ok_payload("hello", "length")};
                      });
  auto r = backend.complete(simple_request());
  REQUIRE(r.content == "hello");
  REQUIRE(r.finish_reason == FinishReason::length);
  REQUIRE(r.usage.has_value());
  REQUIRE(r.usage->prompt_tokens == 12);
  REQUIRE(r.usage->completion_tokens == 34);
}

TEST_CASE("http backend classifies failures", "[backend]") {
  auto with_status = [](int status, std::string body) {
    return HttpBackend("http://fake.test/v1/chat", "key",
                       [status, body](const std::string&, const auto&, const std::string&)
                           -> HttpResult { return {status, body}; });
  };

  auto classify = [&](int status, const std::string& body) {
    try {
      with_status(status, body).complete(simple_request());
      FAIL("expected TransportError");
      return TransportErrorClass::network;
    } catch (const TransportError& e) {
      return e.error_class();
    }
  };

  REQUIRE(classify(429, "") == TransportErrorClass::rate_limited);
  REQUIRE(classify(500, "") == TransportErrorClass::server_error);
  REQUIRE(classify(503, "") == TransportErrorClass::server_error);
  REQUIRE(classify(408, "") == TransportErrorClass::timeout);
  REQUIRE(classify(401, "") == TransportErrorClass::auth);
  REQUIRE(classify(404, "") == TransportErrorClass::bad_request);
  REQUIRE(classify(0, "connection refused") == TransportErrorClass::network);
  REQUIRE(classify(200, "not json at all") == TransportErrorClass::malformed_response);
  REQUIRE(classify(200, "{\"choices\": []}") == TransportErrorClass::malformed_response);
}

TEST_CASE("http backend validates requests before sending", "[backend]") {
  int calls = 0;
  HttpBackend backend("http://fake.test/v1/chat", "key",
                      [&](const std::string&, const auto&, const std::string&) -> HttpResult {
                        ++calls;
                        return {200, ok_payload("x")};
                      });
  ChatRequest empty;
  empty.model = "m";
  REQUIRE_THROWS_AS(backend.complete(empty), ValidationError);

  ChatRequest assistant_last = simple_request();
  assistant_last.messages.push_back({"assistant", "I went first"});
  REQUIRE_THROWS_AS(backend.complete(assistant_last), ValidationError);
  REQUIRE(calls == 0);
}
