#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace targen {

// Root of every error this library throws. The CLI maps subclasses to exit
// codes: validation 2, backend/transport 3, partial-result generation 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::string message, std::vector<std::string> issues = {})
      : Error(std::move(message)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  empty_result,
  missing_field,
  out_of_order,
  label_not_found,
  ambiguous_label,
  bad_verdict,
  bad_format,
};

class ParseFailure : public Error {
 public:
  ParseFailure(ParseErrorKind kind, std::string message)
      : Error(std::move(message)), kind_(kind) {}
  ParseErrorKind kind() const { return kind_; }

 private:
  ParseErrorKind kind_;
};

enum class TransportErrorClass {
  rate_limited,
  server_error,
  timeout,
  auth,
  bad_request,
  network,
  malformed_response,
};

class TransportError : public Error {
 public:
  TransportError(TransportErrorClass error_class, std::string message, int http_status = 0)
      : Error(std::move(message)), class_(error_class), http_status_(http_status) {}
  TransportErrorClass error_class() const { return class_; }
  int http_status() const { return http_status_; }

 private:
  TransportErrorClass class_;
  int http_status_;
};

class ReplayMiss : public TransportError {
 public:
  explicit ReplayMiss(std::string request_hash)
      : TransportError(TransportErrorClass::network,
                       "replay transcript has no entry for request hash " + request_hash),
        request_hash_(std::move(request_hash)) {}
  const std::string& request_hash() const { return request_hash_; }

 private:
  std::string request_hash_;
};

class MockExhausted : public TransportError {
 public:
  MockExhausted()
      : TransportError(TransportErrorClass::network, "mock backend has no scripted responses left") {}
  explicit MockExhausted(std::string message)
      : TransportError(TransportErrorClass::network, std::move(message)) {}
};

// Retry budget ran out before the generation step collected enough unique
// items. Carries whatever was gathered so callers can persist partial state.
class BudgetExhausted : public Error {
 public:
  BudgetExhausted(std::string message, std::vector<std::string> partial)
      : Error(std::move(message)), partial_(std::move(partial)) {}
  const std::vector<std::string>& partial() const { return partial_; }

 private:
  std::vector<std::string> partial_;
};

}  // namespace targen
