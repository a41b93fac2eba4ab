#pragma once

#include <cassert>
#include <optional>
#include <string>
#include <utility>

namespace aggio {

enum class ErrorCode {
  ok = 0,
  invalid_argument,
  out_of_range,
  not_found,
  io_error,
  closed,
  busy,
  rejected,
  data_mismatch,
};

const char* to_string(ErrorCode code);

// Completion status carried through callbacks. Errors never propagate across
// executors as exceptions; they ride the callback payload instead.
class Status {
 public:
  Status() = default;
  Status(ErrorCode code, std::string message) : code_(code), message_(std::move(message)) {}

  static Status Ok() { return {}; }

  bool ok() const { return code_ == ErrorCode::ok; }
  explicit operator bool() const { return ok(); }
  ErrorCode code() const { return code_; }
  const std::string& message() const { return message_; }
  std::string to_string() const;

 private:
  ErrorCode code_ = ErrorCode::ok;
  std::string message_;
};

inline Status Error(ErrorCode code, std::string message) { return {code, std::move(message)}; }

// Value-or-error, shaped after std::expected (not available in C++20).
template <typename T>
class Result {
 public:
  Result(T value) : value_(std::move(value)) {}
  Result(Status status) : status_(std::move(status)) { assert(!status_.ok()); }

  bool ok() const { return status_.ok(); }
  explicit operator bool() const { return ok(); }
  const Status& status() const { return status_; }

  T& value() & { assert(ok()); return *value_; }
  const T& value() const& { assert(ok()); return *value_; }
  T&& value() && { assert(ok()); return std::move(*value_); }

  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }

 private:
  Status status_;
  std::optional<T> value_;
};

}  // namespace aggio
