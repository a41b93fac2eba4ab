#pragma once

#include <chrono>
#include <filesystem>
#include <future>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

#include "aggio/pattern.hpp"
#include "aggio/runtime.hpp"

namespace aggio::testing {

// Callback that resolves a future the test thread can block on.
template <typename T>
class Awaiter {
 public:
  Awaiter() : promise_(std::make_shared<std::promise<T>>()), future_(promise_->get_future()) {}

  rt::Callback<T> callback(rt::ExecutorId where = {}) {
    auto p = promise_;
    return rt::Callback<T>::on(where, [p](T value) { p->set_value(std::move(value)); });
  }

  T get(std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    if (future_.wait_for(timeout) != std::future_status::ready) throw std::runtime_error("callback never fired");
    return future_.get();
  }

 private:
  std::shared_ptr<std::promise<T>> promise_;
  std::future<T> future_;
};

inline std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "aggio-tests";
  std::filesystem::create_directories(dir);
  return dir;
}

// Pattern file cached by size across tests in one binary.
inline std::string pattern_file(std::uint64_t size) {
  auto path = temp_dir() / ("pattern-" + std::to_string(size) + ".bin");
  std::error_code ec;
  if (!std::filesystem::exists(path) || std::filesystem::file_size(path, ec) != size) {
    Status st = pattern::generate(path.string(), size);
    if (!st) throw std::runtime_error(st.to_string());
  }
  return path.string();
}

inline double ms(rt::Duration d) { return std::chrono::duration<double, std::milli>(d).count(); }

}  // namespace aggio::testing
