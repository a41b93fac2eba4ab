#pragma once

#include <algorithm>
#include <future>
#include <memory>
#include <mutex>
#include <vector>

#include "aggio/bench.hpp"
#include "aggio/partition.hpp"
#include "aggio/pattern.hpp"
#include "aggio/runtime.hpp"

namespace aggio::bench::detail {

using Clock = std::chrono::steady_clock;

inline double seconds(Duration d) { return std::chrono::duration<double>(d).count(); }

template <typename T>
class Waiter {
 public:
  Waiter() : promise_(std::make_shared<std::promise<T>>()), future_(promise_->get_future()) {}

  rt::Callback<T> callback(rt::ExecutorId where = {}) {
    auto p = promise_;
    return rt::Callback<T>::on(where, [p](T value) { p->set_value(std::move(value)); });
  }

  T get() { return future_.get(); }

 private:
  std::shared_ptr<std::promise<T>> promise_;
  std::future<T> future_;
};

std::unique_ptr<rt::Runtime> start_runtime(const BenchConfig& cfg);

Result<std::shared_ptr<storage::Backend>> open_backend(const BenchConfig& cfg,
                                                       const storage::BackendFactory& factory);

ckio::InputOptions input_options(const BenchConfig& cfg);

// Synchronous wrappers over the callback API, for the driver thread.
Result<ckio::FileHandle> open_file(ckio::Input& io, const std::string& path, std::uint32_t readers);
Result<ckio::SessionHandle> start_session(ckio::Input& io, const ckio::FileHandle& f, std::uint64_t bytes,
                                          std::uint64_t offset);
Status close_session(ckio::Input& io, const ckio::SessionHandle& s);
Status close_file(ckio::Input& io, const ckio::FileHandle& f);

// Disjoint equal slices of [0, size), as the balanced partition deals them.
std::vector<partition::ByteRange> slices(std::uint64_t size, std::uint32_t n);

Status mismatch(std::string_view what, std::uint64_t offset);

// One slot per client; written on executors, read by the driver after quiescence.
struct Slot {
  std::vector<std::byte> data;
  std::uint64_t offset = 0;
  Clock::time_point issued{};
  Clock::time_point done{};
  Status status;
};

struct Slots {
  explicit Slots(std::size_t n) : slots(n) {}
  std::vector<Slot> slots;

  Status verify() const {
    for (const Slot& s : slots) {
      if (!s.status) return s.status;
      if (auto bad = pattern::first_mismatch(s.data, s.offset)) return mismatch("client slice", s.offset + *bad);
    }
    return Status::Ok();
  }
  Clock::time_point last_done() const {
    Clock::time_point t{};
    for (const Slot& s : slots) t = std::max(t, s.done);
    return t;
  }
};

BenchRecord record(Mode mode, const BenchConfig& cfg, std::uint32_t repetition);

}  // namespace aggio::bench::detail
