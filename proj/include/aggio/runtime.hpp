#pragma once

// Minimal message-driven execution substrate.
//
// A Runtime owns N executors. Each executor is one worker thread draining a
// FIFO task queue. Objects are addressed by ObjectRef and live on exactly one
// executor at a time; invocations on an object run serially on that executor.
// Groups place one member on every executor; arrays hold migratable elements.
// Executors are grouped into emulated nodes, and invocations crossing a node
// boundary are held back by the configured latency (plus payload/bandwidth).

#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "aggio/status.hpp"
#include "aggio/unique_function.hpp"

namespace aggio::rt {

using Clock = std::chrono::steady_clock;
using Duration = Clock::duration;

struct ExecutorId {
  std::uint32_t index = 0;

  friend auto operator<=>(const ExecutorId&, const ExecutorId&) = default;
};

enum class ObjectKind : std::uint8_t { singleton, group_member, array_element };

struct ObjectRef {
  std::uint64_t id = 0;
  ObjectKind kind = ObjectKind::singleton;

  bool valid() const { return id != 0; }
  friend bool operator==(const ObjectRef& a, const ObjectRef& b) { return a.id == b.id; }
};

struct RuntimeConfig {
  std::uint32_t num_executors = 1;
  std::uint32_t executors_per_node = 1;
  Duration inter_node_latency{0};
  // Bytes per second for cross-node payloads; 0 means payload size adds no delay.
  double inter_node_bandwidth = 0.0;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Runtime;

// Base of every addressable object.
class Object {
 public:
  virtual ~Object() = default;

  ObjectRef self() const { return self_; }

 protected:
  // Runs on the destination executor once a migration has landed.
  virtual void on_migrated(ExecutorId /*from*/, ExecutorId /*to*/) {}

 private:
  friend class Runtime;
  ObjectRef self_;
};

template <typename T>
struct Group {
  std::vector<ObjectRef> members;

  std::size_t size() const { return members.size(); }
  ObjectRef operator[](ExecutorId e) const { return members.at(e.index); }
  // Member pinned to the calling executor. Only valid from executor context.
  T& local() const;
};

template <typename T>
struct Array {
  std::vector<ObjectRef> elements;

  std::size_t size() const { return elements.size(); }
  ObjectRef operator[](std::size_t i) const { return elements.at(i); }
};

// An asynchronous continuation addressed to an object (or to a bare executor).
// Invoking it only enqueues a task; it never runs the handler on the caller's stack.
template <typename T>
class Callback {
 public:
  Callback() = default;

  template <typename Obj>
  static Callback to(ObjectRef target, void (Obj::*method)(T)) {
    return to<Obj>(target, [method](Obj& obj, T value) { (obj.*method)(std::move(value)); });
  }

  template <typename Obj, typename F>
  static Callback to(ObjectRef target, F&& handler) {
    Callback cb;
    cb.target_ = target;
    cb.fn_ = std::make_shared<Handler>(
        [h = std::forward<F>(handler)](Object* obj, T value) mutable {
          h(static_cast<Obj&>(*obj), std::move(value));
        });
    return cb;
  }

  // Runs as a free task on the given executor. Handy for test drivers and
  // benchmark harnesses that are not themselves objects.
  template <typename F>
  static Callback on(ExecutorId executor, F&& handler) {
    Callback cb;
    cb.executor_ = executor;
    cb.fn_ = std::make_shared<Handler>(
        [h = std::forward<F>(handler)](Object*, T value) mutable { h(std::move(value)); });
    return cb;
  }

  bool valid() const { return fn_ != nullptr; }
  ObjectRef target() const { return target_; }

  void operator()(T value) const;

 private:
  using Handler = std::function<void(Object*, T)>;

  ObjectRef target_;
  ExecutorId executor_;
  std::shared_ptr<Handler> fn_;
};

struct RuntimeCounters {
  std::uint64_t sent = 0;
  std::uint64_t executed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t reentrancy_violations = 0;
  std::uint64_t task_failures = 0;
};

class Runtime {
 public:
  // Throws ConfigError for invalid configs or when another runtime is active.
  static std::unique_ptr<Runtime> start(const RuntimeConfig& config);

  // The active runtime. Precondition: one was started and not yet destroyed.
  static Runtime& current();
  static bool active();

  // Stops the executors after any in-flight I/O threads have finished.
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const RuntimeConfig& config() const;
  std::uint32_t num_executors() const;
  std::uint32_t num_nodes() const;
  std::uint32_t node_of(ExecutorId e) const;

  // Executor of the calling thread, if it is an executor worker.
  static std::optional<ExecutorId> this_executor();

  template <typename T, typename F>
  ObjectRef create_object(ExecutorId where, F&& factory) {
    check_executor(where);
    std::unique_ptr<Object> obj = factory();
    return register_object(std::move(obj), ObjectKind::singleton, where);
  }

  // factory(ExecutorId) -> std::unique_ptr<T>
  template <typename T, typename F>
  Group<T> create_group(F&& factory) {
    Group<T> group;
    group.members.reserve(num_executors());
    for (std::uint32_t e = 0; e < num_executors(); ++e) {
      std::unique_ptr<Object> obj = factory(ExecutorId{e});
      group.members.push_back(register_object(std::move(obj), ObjectKind::group_member, ExecutorId{e}));
    }
    return group;
  }

  // factory(index) -> std::unique_ptr<T>; placement(index) -> ExecutorId.
  // Throws std::out_of_range when placement names a nonexistent executor.
  template <typename T, typename F, typename P>
  Array<T> create_array(std::size_t n, F&& factory, P&& placement) {
    if (n == 0) throw std::invalid_argument("create_array: n must be >= 1");
    std::vector<ExecutorId> where(n);
    for (std::size_t i = 0; i < n; ++i) {
      where[i] = placement(i);
      if (where[i].index >= num_executors())
        throw std::out_of_range("create_array: placement of element " + std::to_string(i) +
                                " names executor " + std::to_string(where[i].index));
    }
    Array<T> array;
    array.elements.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::unique_ptr<Object> obj = factory(i);
      array.elements.push_back(register_object(std::move(obj), ObjectKind::array_element, where[i]));
    }
    return array;
  }

  // Enqueue f(T&) on the target's current executor. payload_bytes only feeds
  // the cross-node delay model.
  template <typename T, typename F>
  void send(ObjectRef target, F&& f, std::size_t payload_bytes = 0) {
    send_raw(target,
             UniqueFunction<void(Object*)>(
                 [fn = std::forward<F>(f)](Object* obj) mutable { fn(static_cast<T&>(*obj)); }),
             payload_bytes);
  }

  template <typename T>
  void broadcast(const Group<T>& group, const std::function<void(T&)>& f) {
    for (ObjectRef m : group.members) send<T>(m, f);
  }

  // Free task on an executor.
  void post(ExecutorId executor, UniqueFunction<void()> task, std::size_t payload_bytes = 0);

  // Asynchronous migration of an array element. Rejections (group members,
  // invalid destination, unknown object) are returned immediately; on success
  // `done` fires on the destination executor after the object has landed.
  Status migrate(ObjectRef object, ExecutorId dest, Callback<Status> done = {});

  // Asynchronously destroys the object on its executor. Later invocations are dropped.
  void destroy(ObjectRef object);

  std::optional<ExecutorId> location(ObjectRef object) const;

  // Object pinned to the calling executor (group members). Throws std::logic_error
  // when called outside executor context or when the object lives elsewhere.
  template <typename T>
  T& local(ObjectRef object) {
    return static_cast<T&>(local_object(object));
  }

  template <typename T>
  T& local(const Group<T>& group) {
    auto e = this_executor();
    if (!e) throw std::logic_error("local group member requested outside executor context");
    return local<T>(group[*e]);
  }

  // Returns once every sent invocation has executed and no I/O is in flight.
  // Must be called from outside executor context.
  void await_quiescence();

  // I/O-in-flight accounting for quiescence. An I/O thread must send its
  // completion invocation before calling io_finished().
  void io_started();
  void io_finished();

  RuntimeCounters counters() const;
  std::size_t live_objects() const;

 private:
  struct Impl;

  explicit Runtime(const RuntimeConfig& config);

  void check_executor(ExecutorId e) const;
  ObjectRef register_object(std::unique_ptr<Object> obj, ObjectKind kind, ExecutorId where);
  void send_raw(ObjectRef target, UniqueFunction<void(Object*)> fn, std::size_t payload_bytes);
  Object& local_object(ObjectRef object);

  static void notify_migrated(Object& obj, ExecutorId from, ExecutorId to) { obj.on_migrated(from, to); }

  template <typename T>
  friend class Callback;

  std::unique_ptr<Impl> impl_;
};

template <typename T>
T& Group<T>::local() const {
  return Runtime::current().local(*this);
}

template <typename T>
void Callback<T>::operator()(T value) const {
  if (!fn_) return;
  Runtime& rt = Runtime::current();
  auto fn = fn_;
  if (target_.valid()) {
    rt.send_raw(target_,
                UniqueFunction<void(Object*)>([fn, v = std::move(value)](Object* obj) mutable {
                  (*fn)(obj, std::move(v));
                }),
                0);
  } else {
    rt.post(executor_, [fn, v = std::move(value)]() mutable { (*fn)(nullptr, std::move(v)); });
  }
}

}  // namespace aggio::rt
