#include "aggio/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <exception>
#include <mutex>
#include <shared_mutex>
#include <thread>
#include <unordered_map>

namespace aggio::rt {

namespace {

std::atomic<Runtime*> g_runtime{nullptr};
thread_local int tls_executor = -1;

enum class MessageKind : std::uint8_t { invoke, task, migrate, arrive, destroy };

struct Message {
  MessageKind kind = MessageKind::task;
  std::uint64_t target = 0;
  UniqueFunction<void(Object*)> fn;
  std::size_t payload_bytes = 0;
  std::uint32_t dest = 0;    // migrate: destination; arrive: origin
  Clock::time_point ready_at{};
  std::uint64_t seq = 0;
};

struct DelayedLater {
  bool operator()(const Message& a, const Message& b) const {
    if (a.ready_at != b.ready_at) return a.ready_at > b.ready_at;
    return a.seq > b.seq;
  }
};

struct Entry {
  std::unique_ptr<Object> obj;
  ObjectKind kind = ObjectKind::singleton;
  std::atomic<std::uint32_t> executor{0};
  std::atomic<bool> busy{false};
};

}  // namespace

struct Runtime::Impl {
  struct Executor {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<Message> ready;
    std::vector<Message> delayed;  // min-heap on (ready_at, seq)
    std::uint64_t next_seq = 0;
    bool stopping = false;
    std::thread thread;
  };

  explicit Impl(const RuntimeConfig& cfg) : config(cfg), executors(cfg.num_executors) {
    for (auto& ex : executors) ex = std::make_unique<Executor>();
  }

  RuntimeConfig config;
  std::vector<std::unique_ptr<Executor>> executors;

  mutable std::shared_mutex table_mutex;
  std::unordered_map<std::uint64_t, std::shared_ptr<Entry>> table;
  std::atomic<std::uint64_t> next_object_id{1};

  std::atomic<std::uint64_t> sent{0};
  std::atomic<std::uint64_t> executed{0};
  std::atomic<std::uint64_t> dropped{0};
  std::atomic<std::uint64_t> forwarded{0};
  std::atomic<std::uint64_t> reentrancy_violations{0};
  std::atomic<std::uint64_t> task_failures{0};
  std::atomic<std::int64_t> io_inflight{0};

  std::uint32_t node_of(std::uint32_t e) const { return e / config.executors_per_node; }

  std::shared_ptr<Entry> find(std::uint64_t id) const {
    std::shared_lock lock(table_mutex);
    auto it = table.find(id);
    return it == table.end() ? nullptr : it->second;
  }

  Duration delivery_delay(int from, std::uint32_t to, std::size_t payload_bytes) const {
    if (from < 0 || node_of(static_cast<std::uint32_t>(from)) == node_of(to)) return Duration::zero();
    Duration delay = config.inter_node_latency;
    if (config.inter_node_bandwidth > 0.0 && payload_bytes > 0) {
      delay += std::chrono::duration_cast<Duration>(
          std::chrono::duration<double>(static_cast<double>(payload_bytes) / config.inter_node_bandwidth));
    }
    return delay;
  }

  // Pushes without touching the sent counter (callers account for it).
  void push(std::uint32_t to, Message msg, Duration delay) {
    Executor& ex = *executors[to];
    {
      std::lock_guard lock(ex.mutex);
      msg.seq = ex.next_seq++;
      if (delay > Duration::zero()) {
        msg.ready_at = Clock::now() + delay;
        ex.delayed.push_back(std::move(msg));
        std::push_heap(ex.delayed.begin(), ex.delayed.end(), DelayedLater{});
      } else {
        ex.ready.push_back(std::move(msg));
      }
    }
    ex.cv.notify_one();
  }

  void enqueue(std::uint32_t to, Message msg) {
    Duration delay = delivery_delay(tls_executor, to, msg.payload_bytes);
    sent.fetch_add(1);
    push(to, std::move(msg), delay);
  }

  void forward(std::uint32_t me, std::uint32_t to, Message msg) {
    forwarded.fetch_add(1);
    Duration delay = delivery_delay(static_cast<int>(me), to, msg.payload_bytes);
    push(to, std::move(msg), delay);
  }

  void run_guarded(Message& msg, Object* obj) {
    try {
      msg.fn(obj);
    } catch (const std::exception& e) {
      task_failures.fetch_add(1);
      std::fprintf(stderr, "aggio: task threw: %s\n", e.what());
    } catch (...) {
      task_failures.fetch_add(1);
      std::fprintf(stderr, "aggio: task threw an unknown exception\n");
    }
  }

  void process(std::uint32_t me, Message msg) {
    if (msg.kind == MessageKind::task) {
      run_guarded(msg, nullptr);
      executed.fetch_add(1);
      return;
    }
    std::shared_ptr<Entry> entry = find(msg.target);
    if (!entry) {
      dropped.fetch_add(1);
      executed.fetch_add(1);
      return;
    }
    std::uint32_t where = entry->executor.load();
    if (where != me) {
      // Straggler that raced a migration: re-forward to the new home.
      forward(me, where, std::move(msg));
      return;
    }
    switch (msg.kind) {
      case MessageKind::invoke:
      case MessageKind::arrive: {
        if (entry->busy.exchange(true)) reentrancy_violations.fetch_add(1);
        if (msg.kind == MessageKind::arrive)
          Runtime::notify_migrated(*entry->obj, ExecutorId{msg.dest}, ExecutorId{me});
        run_guarded(msg, entry->obj.get());
        entry->busy.store(false);
        break;
      }
      case MessageKind::migrate: {
        // Nothing of this object runs while its executor handles the control
        // message, so moving the location here cannot overlap an invocation.
        std::uint32_t dest = msg.dest;
        Message arrive;
        arrive.kind = MessageKind::arrive;
        arrive.target = msg.target;
        arrive.fn = std::move(msg.fn);
        arrive.dest = me;
        entry->executor.store(dest);
        enqueue(dest, std::move(arrive));
        break;
      }
      case MessageKind::destroy: {
        std::unique_ptr<Object> doomed;
        {
          std::unique_lock lock(table_mutex);
          doomed = std::move(entry->obj);
          table.erase(msg.target);
        }
        break;
      }
      case MessageKind::task:
        break;
    }
    executed.fetch_add(1);
  }

  void worker(std::uint32_t me) {
    tls_executor = static_cast<int>(me);
    Executor& ex = *executors[me];
    std::unique_lock lock(ex.mutex);
    for (;;) {
      auto now = Clock::now();
      while (!ex.delayed.empty() && ex.delayed.front().ready_at <= now) {
        std::pop_heap(ex.delayed.begin(), ex.delayed.end(), DelayedLater{});
        ex.ready.push_back(std::move(ex.delayed.back()));
        ex.delayed.pop_back();
      }
      if (!ex.ready.empty()) {
        Message msg = std::move(ex.ready.front());
        ex.ready.pop_front();
        lock.unlock();
        process(me, std::move(msg));
        lock.lock();
        continue;
      }
      if (ex.stopping) break;
      if (ex.delayed.empty())
        ex.cv.wait(lock);
      else
        ex.cv.wait_until(lock, ex.delayed.front().ready_at);
    }
    tls_executor = -1;
  }
};

static const char* to_string_kind(ObjectKind k) {
  switch (k) {
    case ObjectKind::singleton: return "singleton";
    case ObjectKind::group_member: return "group member";
    case ObjectKind::array_element: return "array element";
  }
  return "?";
}

std::unique_ptr<Runtime> Runtime::start(const RuntimeConfig& config) {
  if (config.num_executors == 0) throw ConfigError("runtime needs at least one executor");
  if (config.executors_per_node == 0 || config.num_executors % config.executors_per_node != 0)
    throw ConfigError("executors_per_node (" + std::to_string(config.executors_per_node) +
                      ") must divide num_executors (" + std::to_string(config.num_executors) + ")");
  if (config.inter_node_latency < Duration::zero()) throw ConfigError("inter_node_latency must be >= 0");
  if (config.inter_node_bandwidth < 0.0) throw ConfigError("inter_node_bandwidth must be >= 0");

  std::unique_ptr<Runtime> rt(new Runtime(config));
  Runtime* expected = nullptr;
  if (!g_runtime.compare_exchange_strong(expected, rt.get()))
    throw ConfigError("a runtime is already active in this process");
  for (std::uint32_t e = 0; e < config.num_executors; ++e)
    rt->impl_->executors[e]->thread = std::thread([impl = rt->impl_.get(), e] { impl->worker(e); });
  return rt;
}

Runtime::Runtime(const RuntimeConfig& config) : impl_(std::make_unique<Impl>(config)) {}

Runtime::~Runtime() {
  // Detached I/O threads post back into the runtime; let them finish first.
  while (impl_->io_inflight.load() > 0) std::this_thread::sleep_for(std::chrono::microseconds(200));
  for (auto& ex : impl_->executors) {
    {
      std::lock_guard lock(ex->mutex);
      ex->stopping = true;
      ex->delayed.clear();
    }
    ex->cv.notify_all();
  }
  for (auto& ex : impl_->executors)
    if (ex->thread.joinable()) ex->thread.join();
  {
    std::unique_lock lock(impl_->table_mutex);
    impl_->table.clear();
  }
  Runtime* self = this;
  g_runtime.compare_exchange_strong(self, nullptr);
}

Runtime& Runtime::current() {
  Runtime* rt = g_runtime.load();
  if (!rt) throw std::logic_error("no active runtime");
  return *rt;
}

bool Runtime::active() { return g_runtime.load() != nullptr; }

const RuntimeConfig& Runtime::config() const { return impl_->config; }
std::uint32_t Runtime::num_executors() const { return impl_->config.num_executors; }
std::uint32_t Runtime::num_nodes() const {
  return impl_->config.num_executors / impl_->config.executors_per_node;
}
std::uint32_t Runtime::node_of(ExecutorId e) const { return impl_->node_of(e.index); }

std::optional<ExecutorId> Runtime::this_executor() {
  if (tls_executor < 0) return std::nullopt;
  return ExecutorId{static_cast<std::uint32_t>(tls_executor)};
}

void Runtime::check_executor(ExecutorId e) const {
  if (e.index >= num_executors())
    throw std::out_of_range("executor " + std::to_string(e.index) + " does not exist");
}

ObjectRef Runtime::register_object(std::unique_ptr<Object> obj, ObjectKind kind, ExecutorId where) {
  check_executor(where);
  ObjectRef ref{impl_->next_object_id.fetch_add(1), kind};
  obj->self_ = ref;
  auto entry = std::make_shared<Entry>();
  entry->obj = std::move(obj);
  entry->kind = kind;
  entry->executor.store(where.index);
  std::unique_lock lock(impl_->table_mutex);
  impl_->table.emplace(ref.id, std::move(entry));
  return ref;
}

void Runtime::send_raw(ObjectRef target, UniqueFunction<void(Object*)> fn, std::size_t payload_bytes) {
  std::shared_ptr<Entry> entry = impl_->find(target.id);
  if (!entry) {
    impl_->dropped.fetch_add(1);
    return;
  }
  Message msg;
  msg.kind = MessageKind::invoke;
  msg.target = target.id;
  msg.fn = std::move(fn);
  msg.payload_bytes = payload_bytes;
  impl_->enqueue(entry->executor.load(), std::move(msg));
}

void Runtime::post(ExecutorId executor, UniqueFunction<void()> task, std::size_t payload_bytes) {
  check_executor(executor);
  Message msg;
  msg.kind = MessageKind::task;
  msg.fn = [t = std::move(task)](Object*) mutable { t(); };
  msg.payload_bytes = payload_bytes;
  impl_->enqueue(executor.index, std::move(msg));
}

Status Runtime::migrate(ObjectRef object, ExecutorId dest, Callback<Status> done) {
  if (dest.index >= num_executors())
    return Error(ErrorCode::invalid_argument, "migrate: executor " + std::to_string(dest.index) + " does not exist");
  std::shared_ptr<Entry> entry = impl_->find(object.id);
  if (!entry) return Error(ErrorCode::not_found, "migrate: unknown object");
  if (entry->kind != ObjectKind::array_element)
    return Error(ErrorCode::rejected, std::string("migrate: ") + to_string_kind(entry->kind) + "s are pinned");
  Message msg;
  msg.kind = MessageKind::migrate;
  msg.target = object.id;
  msg.dest = dest.index;
  msg.fn = [done = std::move(done)](Object*) { done(Status::Ok()); };
  impl_->enqueue(entry->executor.load(), std::move(msg));
  return Status::Ok();
}

void Runtime::destroy(ObjectRef object) {
  std::shared_ptr<Entry> entry = impl_->find(object.id);
  if (!entry) {
    impl_->dropped.fetch_add(1);
    return;
  }
  Message msg;
  msg.kind = MessageKind::destroy;
  msg.target = object.id;
  impl_->enqueue(entry->executor.load(), std::move(msg));
}

std::optional<ExecutorId> Runtime::location(ObjectRef object) const {
  std::shared_ptr<Entry> entry = impl_->find(object.id);
  if (!entry) return std::nullopt;
  return ExecutorId{entry->executor.load()};
}

Object& Runtime::local_object(ObjectRef object) {
  auto me = this_executor();
  if (!me) throw std::logic_error("local object access outside executor context");
  std::shared_ptr<Entry> entry = impl_->find(object.id);
  if (!entry || entry->executor.load() != me->index)
    throw std::logic_error("object is not resident on the calling executor");
  return *entry->obj;
}

void Runtime::await_quiescence() {
  if (this_executor()) throw std::logic_error("await_quiescence called from executor context");
  for (;;) {
    // Order matters: executed, then I/O, then sent. Equality then implies that
    // nothing was pending at the moment `executed` was read.
    std::uint64_t executed = impl_->executed.load();
    std::int64_t io = impl_->io_inflight.load();
    std::uint64_t sent = impl_->sent.load();
    if (io == 0 && sent == executed) return;
    std::this_thread::sleep_for(std::chrono::microseconds(100));
  }
}

void Runtime::io_started() { impl_->io_inflight.fetch_add(1); }
void Runtime::io_finished() { impl_->io_inflight.fetch_sub(1); }

RuntimeCounters Runtime::counters() const {
  RuntimeCounters c;
  c.sent = impl_->sent.load();
  c.executed = impl_->executed.load();
  c.dropped = impl_->dropped.load();
  c.forwarded = impl_->forwarded.load();
  c.reentrancy_violations = impl_->reentrancy_violations.load();
  c.task_failures = impl_->task_failures.load();
  return c;
}

std::size_t Runtime::live_objects() const {
  std::shared_lock lock(impl_->table_mutex);
  return impl_->table.size();
}

}  // namespace aggio::rt
