#pragma once

// Live chat-completion client. The HTTP transport is injectable so tests can
// script status codes and payloads without sockets; the default transport
// uses cpp-httplib. Kept out of backend.hpp so test binaries that never talk
// to a network do not pull the socket code in.

#include <cstdlib>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "targen/backend.hpp"

namespace targen::backend {

struct HttpResult {
  int status = 0;  // 0 means the request never completed (DNS, refused, ...)
  std::string body;
};

using HttpPostFn = std::function<HttpResult(const std::string& url,
                                            const std::vector<std::pair<std::string, std::string>>& headers,
                                            const std::string& body)>;

HttpResult httplib_post(const std::string& url,
                        const std::vector<std::pair<std::string, std::string>>& headers,
                        const std::string& body);

class HttpBackend : public ChatBackend {
 public:
  HttpBackend(std::string endpoint, std::string api_key, HttpPostFn post = nullptr)
      : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), post_(std::move(post)) {
    if (endpoint_.empty()) throw Error("http backend requires an endpoint URL");
  }

  ChatResponse complete(const ChatRequest& request) override {
    auto issues = request.issues();
    if (!issues.empty()) throw ValidationError("invalid chat request", issues);

    std::vector<std::pair<std::string, std::string>> headers{{"Content-Type", "application/json"}};
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

    HttpResult result = post_ ? post_(endpoint_, headers, request_to_json(request).dump())
                              : httplib_post(endpoint_, headers, request_to_json(request).dump());

    if (result.status == 0)
      throw TransportError(TransportErrorClass::network,
                           "request to " + endpoint_ + " failed: " + result.body);
    if (result.status == 429)
      throw TransportError(TransportErrorClass::rate_limited, "rate limited", result.status);
    if (result.status == 408 || result.status == 504)
      throw TransportError(TransportErrorClass::timeout, "request timed out", result.status);
    if (result.status == 401 || result.status == 403)
      throw TransportError(TransportErrorClass::auth, "authorization rejected", result.status);
    if (result.status >= 500)
      throw TransportError(TransportErrorClass::server_error,
                           "server error " + std::to_string(result.status), result.status);
    if (result.status >= 400)
      throw TransportError(TransportErrorClass::bad_request,
                           "request rejected with status " + std::to_string(result.status) + ": " +
                               result.body.substr(0, 200),
                           result.status);

    json j = json::parse(result.body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
        j["choices"].empty())
      throw TransportError(TransportErrorClass::malformed_response,
                           "undecodable completion payload: " + result.body.substr(0, 200),
                           result.status);
    const json& choice = j["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content"))
      throw TransportError(TransportErrorClass::malformed_response,
                           "completion payload missing choices[0].message.content", result.status);

    ChatResponse r;
    r.content = choice["message"]["content"].get<std::string>();
    r.finish_reason = finish_reason_from(choice.value("finish_reason", std::string("other")));
    if (j.contains("usage")) {
      Usage u;
      u.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
      u.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
      r.usage = u;
    }
    if (r.finish_reason == FinishReason::stop && r.content.empty())
      throw TransportError(TransportErrorClass::malformed_response,
                           "finish_reason stop with empty content", result.status);
    return r;
  }

  std::string id() const override { return "http:" + endpoint_; }
  bool deterministic() const override { return false; }

 private:
  std::string endpoint_;
  std::string api_key_;
  HttpPostFn post_;
};

// Endpoint from TARGEN_ENDPOINT, key from TARGEN_API_KEY.
inline HttpBackend http_backend_from_environment() {
  const char* endpoint = std::getenv("TARGEN_ENDPOINT");
  const char* key = std::getenv("TARGEN_API_KEY");
  if (!endpoint || !*endpoint)
    throw Error("TARGEN_ENDPOINT is not set; a live backend needs an endpoint URL");
  return HttpBackend(endpoint, key ? key : "");
}

}  // namespace targen::backend

#ifdef TARGEN_ENABLE_HTTPLIB
#include "httplib.h"

namespace targen::backend {

inline HttpResult httplib_post(const std::string& url,
                               const std::vector<std::pair<std::string, std::string>>& headers,
                               const std::string& body) {
  std::string scheme_host = url;
  std::string path = "/";
  std::size_t scheme = url.find("://");
  if (scheme != std::string::npos) {
    std::size_t slash = url.find('/', scheme + 3);
    if (slash != std::string::npos) {
      scheme_host = url.substr(0, slash);
      path = url.substr(slash);
    }
  }
  httplib::Client client(scheme_host);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

}  // namespace targen::backend
#else
namespace targen::backend {

inline HttpResult httplib_post(const std::string&,
                               const std::vector<std::pair<std::string, std::string>>&,
                               const std::string&) {
  throw TransportError(TransportErrorClass::network,
                       "live HTTP transport not compiled in; pass a transport function");
}

}  // namespace targen::backend
#endif
