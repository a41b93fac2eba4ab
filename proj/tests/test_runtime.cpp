#include <doctest.h>

#include <atomic>
#include <thread>

#include "aggio/runtime.hpp"
#include "support.hpp"

using namespace aggio;
using namespace aggio::rt;
using aggio::testing::Awaiter;
using namespace std::chrono_literals;

namespace {

struct Counter : Object {
  std::atomic<int>* total = nullptr;
  int local = 0;
  bool inside = false;
  bool overlap = false;
  void hit() {
    if (inside) overlap = true;
    inside = true;
    ++local;
    if (total) total->fetch_add(1);
    std::this_thread::yield();
    inside = false;
  }
};

struct Chain : Object {
  int remaining = 0;
  std::atomic<int>* executions = nullptr;
  void step() {
    executions->fetch_add(1);
    if (--remaining > 0) Runtime::current().send<Chain>(self(), [](Chain& c) { c.step(); });
  }
};

std::unique_ptr<Runtime> start(std::uint32_t n, std::uint32_t per_node = 0, Duration latency = {}) {
  RuntimeConfig cfg;
  cfg.num_executors = n;
  cfg.executors_per_node = per_node == 0 ? n : per_node;
  cfg.inter_node_latency = latency;
  return Runtime::start(cfg);
}

}  // namespace

TEST_SUITE("runtime") {
  TEST_CASE("start_runtime validates its config") {
    {
      auto rt = start(1, 1);
      CHECK(rt->num_executors() == 1);
      CHECK(rt->num_nodes() == 1);
      CHECK_THROWS_AS(start(1, 1), ConfigError);  // one runtime per process
    }
    {
      auto rt = start(8, 4);
      CHECK(rt->num_nodes() == 2);
      for (std::uint32_t e = 0; e < 8; ++e) CHECK(rt->node_of(ExecutorId{e}) == e / 4);
    }
    CHECK_THROWS_AS(start(3, 2), ConfigError);
    RuntimeConfig zero;
    zero.num_executors = 0;
    CHECK_THROWS_AS(Runtime::start(zero), ConfigError);
    CHECK_FALSE(Runtime::active());
  }

  TEST_CASE("groups pin one member per executor") {
    auto rt = start(4);
    std::atomic<int> total{0};
    auto group = rt->create_group<Counter>([&](ExecutorId) {
      auto c = std::make_unique<Counter>();
      c->total = &total;
      return c;
    });
    REQUIRE(group.size() == 4);
    for (std::uint32_t e = 0; e < 4; ++e) CHECK(rt->location(group[ExecutorId{e}])->index == e);

    Awaiter<std::uint64_t> who;
    auto cb = who.callback();
    rt->post(ExecutorId{2}, [&group, cb] { cb(group.local().self().id); });
    CHECK(who.get() == group[ExecutorId{2}].id);

    rt->broadcast<Counter>(group, [](Counter& c) { c.hit(); });
    rt->await_quiescence();
    CHECK(total.load() == 4);

    CHECK_FALSE(rt->migrate(group[ExecutorId{1}], ExecutorId{0}).ok());
  }

  TEST_CASE("array placement") {
    auto rt = start(4);
    auto make = [](std::size_t) { return std::make_unique<Counter>(); };
    auto rr = rt->create_array<Counter>(4, make, [](std::size_t i) { return ExecutorId{static_cast<std::uint32_t>(i)}; });
    for (std::size_t i = 0; i < 4; ++i) CHECK(rt->location(rr[i])->index == i);

    auto blocked = rt->create_array<Counter>(8, make, [](std::size_t i) { return ExecutorId{static_cast<std::uint32_t>(i / 4)}; });
    for (std::size_t i = 0; i < 8; ++i) CHECK(rt->location(blocked[i])->index == i / 4);

    auto before = rt->live_objects();
    CHECK_THROWS_AS(rt->create_array<Counter>(1, make, [](std::size_t) { return ExecutorId{5}; }), std::out_of_range);
    CHECK(rt->live_objects() == before);
  }

  TEST_CASE("send delivers exactly once and serially") {
    auto rt = start(4);
    auto target = rt->create_object<Counter>(ExecutorId{0}, [] { return std::make_unique<Counter>(); });
    Counter* raw = nullptr;
    {
      Awaiter<int> got;
      auto cb = got.callback();
      rt->send<Counter>(target, [&raw, cb](Counter& c) {
        raw = &c;
        cb(0);
      });
      got.get();
    }
    for (std::uint32_t e = 0; e < 4; ++e) {
      rt->post(ExecutorId{e}, [target] {
        for (int i = 0; i < 250; ++i) Runtime::current().send<Counter>(target, [](Counter& c) { c.hit(); });
      });
    }
    rt->await_quiescence();
    CHECK(raw->local == 1000);
    CHECK_FALSE(raw->overlap);
    CHECK(rt->counters().reentrancy_violations == 0);
    CHECK(rt->counters().sent == rt->counters().executed);
  }

  TEST_CASE("cross-node sends are delayed by the configured latency") {
    auto rt = start(2, 1, 5ms);
    auto local = rt->create_object<Counter>(ExecutorId{0}, [] { return std::make_unique<Counter>(); });
    auto remote = rt->create_object<Counter>(ExecutorId{1}, [] { return std::make_unique<Counter>(); });

    Awaiter<Duration> same, cross;
    auto cs = same.callback(), cc = cross.callback();
    rt->post(ExecutorId{0}, [=] {
      auto t0 = Clock::now();
      Runtime::current().send<Counter>(local, [t0, cs](Counter&) { cs(Clock::now() - t0); });
      Runtime::current().send<Counter>(remote, [t0, cc](Counter&) { cc(Clock::now() - t0); });
    });
    CHECK(aggio::testing::ms(cross.get()) >= 5.0);
    CHECK(aggio::testing::ms(same.get()) < 5.0);
  }

  TEST_CASE("payload bandwidth adds to cross-node delay") {
    RuntimeConfig cfg;
    cfg.num_executors = 2;
    cfg.executors_per_node = 1;
    cfg.inter_node_bandwidth = 1e9;
    auto rt = Runtime::start(cfg);
    auto remote = rt->create_object<Counter>(ExecutorId{1}, [] { return std::make_unique<Counter>(); });
    Awaiter<Duration> got;
    auto cb = got.callback();
    rt->post(ExecutorId{0}, [=] {
      auto t0 = Clock::now();
      // 20 MB at 1 GB/s is 20 ms.
      Runtime::current().send<Counter>(remote, [t0, cb](Counter&) { cb(Clock::now() - t0); }, 20'000'000);
    });
    CHECK(aggio::testing::ms(got.get()) >= 20.0);
  }

  TEST_CASE("sends to destroyed objects are dropped and counted") {
    auto rt = start(2);
    auto obj = rt->create_object<Counter>(ExecutorId{1}, [] { return std::make_unique<Counter>(); });
    rt->destroy(obj);
    rt->await_quiescence();
    auto dropped = rt->counters().dropped;
    rt->send<Counter>(obj, [](Counter& c) { c.hit(); });
    rt->await_quiescence();
    CHECK(rt->counters().dropped == dropped + 1);
    CHECK_FALSE(rt->location(obj).has_value());
  }

  TEST_CASE("callbacks enqueue instead of running inline") {
    auto rt = start(1);
    Awaiter<bool> result;
    auto done = result.callback();
    rt->post(ExecutorId{0}, [done] {
      auto ran = std::make_shared<bool>(false);
      auto cb = Callback<int>::on(ExecutorId{0}, [ran](int) { *ran = true; });
      cb(1);
      bool inline_run = *ran;
      done(inline_run);
    });
    CHECK_FALSE(result.get());
  }
}

TEST_SUITE("migration") {
  TEST_CASE("identity migration completes") {
    auto rt = start(2);
    auto arr = rt->create_array<Counter>(1, [](std::size_t) { return std::make_unique<Counter>(); },
                                         [](std::size_t) { return ExecutorId{0}; });
    Awaiter<Status> done;
    REQUIRE(rt->migrate(arr[0], ExecutorId{0}, done.callback()).ok());
    CHECK(done.get().ok());
    CHECK(rt->location(arr[0])->index == 0);
  }

  TEST_CASE("invocations racing a migration each execute exactly once") {
    auto rt = start(4, 2, 1ms);
    std::atomic<int> total{0};
    Counter* raw = nullptr;
    auto arr = rt->create_array<Counter>(
        1,
        [&](std::size_t) {
          auto c = std::make_unique<Counter>();
          c->total = &total;
          raw = c.get();
          return c;
        },
        [](std::size_t) { return ExecutorId{0}; });
    ObjectRef ref = arr[0];
    for (std::uint32_t e = 0; e < 4; ++e) {
      rt->post(ExecutorId{e}, [ref] {
        for (int i = 0; i < 25; ++i) Runtime::current().send<Counter>(ref, [](Counter& c) { c.hit(); });
      });
    }
    Awaiter<Status> first, second;
    REQUIRE(rt->migrate(ref, ExecutorId{3}, first.callback()).ok());
    REQUIRE(first.get().ok());
    REQUIRE(rt->migrate(ref, ExecutorId{1}, second.callback()).ok());
    REQUIRE(second.get().ok());
    rt->await_quiescence();
    CHECK(total.load() == 100);
    CHECK(raw->local == 100);
    CHECK_FALSE(raw->overlap);
    CHECK(rt->location(ref)->index == 1);
    CHECK(rt->counters().reentrancy_violations == 0);
  }

  TEST_CASE("a ref captured before migration still reaches the object") {
    auto rt = start(2);
    auto arr = rt->create_array<Counter>(1, [](std::size_t) { return std::make_unique<Counter>(); },
                                         [](std::size_t) { return ExecutorId{0}; });
    Awaiter<Status> moved;
    REQUIRE(rt->migrate(arr[0], ExecutorId{1}, moved.callback()).ok());
    moved.get();
    Awaiter<std::uint32_t> where;
    auto cb = where.callback();
    rt->send<Counter>(arr[0], [cb](Counter&) { cb(Runtime::this_executor()->index); });
    CHECK(where.get() == 1);
  }

  TEST_CASE("bad migrations are rejected") {
    auto rt = start(2);
    auto single = rt->create_object<Counter>(ExecutorId{0}, [] { return std::make_unique<Counter>(); });
    CHECK(rt->migrate(single, ExecutorId{1}).code() == ErrorCode::rejected);
    auto arr = rt->create_array<Counter>(1, [](std::size_t) { return std::make_unique<Counter>(); },
                                         [](std::size_t) { return ExecutorId{0}; });
    CHECK(rt->migrate(arr[0], ExecutorId{7}).code() == ErrorCode::invalid_argument);
  }
}

TEST_SUITE("quiescence") {
  TEST_CASE("returns immediately when idle") {
    auto rt = start(2);
    auto t0 = Clock::now();
    rt->await_quiescence();
    CHECK(aggio::testing::ms(Clock::now() - t0) < 50.0);
  }

  TEST_CASE("waits for a self-perpetuating chain") {
    auto rt = start(2);
    std::atomic<int> executions{0};
    auto ref = rt->create_object<Chain>(ExecutorId{1}, [&] {
      auto c = std::make_unique<Chain>();
      c->remaining = 1000;
      c->executions = &executions;
      return c;
    });
    rt->send<Chain>(ref, [](Chain& c) { c.step(); });
    rt->await_quiescence();
    CHECK(executions.load() == 1000);
  }

  TEST_CASE("waits for in-flight I/O") {
    auto rt = start(1);
    std::atomic<bool> delivered{false};
    auto obj = rt->create_object<Counter>(ExecutorId{0}, [] { return std::make_unique<Counter>(); });
    Runtime* r = rt.get();
    r->io_started();
    std::thread([r, obj, &delivered] {
      std::this_thread::sleep_for(100ms);
      r->send<Counter>(obj, [&delivered](Counter&) { delivered = true; });
      r->io_finished();
    }).detach();
    auto t0 = Clock::now();
    rt->await_quiescence();
    CHECK(aggio::testing::ms(Clock::now() - t0) >= 95.0);
    CHECK(delivered.load());
  }
}
