#include <thread>

#include "common.hpp"

namespace aggio::bench {
namespace {

using namespace detail;

struct NaiveClient : rt::Object {
  std::shared_ptr<storage::Backend> backend;
  std::shared_ptr<Slots> slots;
  std::size_t index = 0;
  partition::ByteRange slice;

  void go() {
    Slot& slot = slots->slots[index];
    slot.offset = slice.start;
    slot.issued = Clock::now();
    auto& runtime = rt::Runtime::current();
    runtime.io_started();
    std::thread([&runtime, me = self(), b = backend, s = slice] {
      auto data = b->read_at(s.start, s.size());
      auto done = Clock::now();
      runtime.send<NaiveClient>(me, [data = std::move(data), done](NaiveClient& c) mutable {
        c.deliver(std::move(data), done);
      });
      runtime.io_finished();
    }).detach();
  }

  void deliver(Result<std::vector<std::byte>> data, Clock::time_point done) {
    Slot& slot = slots->slots[index];
    slot.done = done;
    if (!data) {
      slot.status = data.status();
      return;
    }
    slot.data = std::move(data).value();
  }
};

}  // namespace

Rows bench_naive(const BenchConfig& cfg) {
  Status st = validate(cfg);
  if (!st) return st;
  auto runtime = start_runtime(cfg);
  auto factory = storage::make_factory(cfg.backend);
  auto backend = open_backend(cfg, factory);
  if (!backend) return backend.status();
  const std::uint64_t size = (*backend)->size();
  auto parts = slices(size, cfg.clients);

  std::vector<BenchRecord> rows;
  for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
    auto slots = std::make_shared<Slots>(cfg.clients);
    auto clients = runtime->create_array<NaiveClient>(
        cfg.clients,
        [&](std::size_t i) {
          auto c = std::make_unique<NaiveClient>();
          c->backend = *backend;
          c->slots = slots;
          c->index = i;
          c->slice = parts[i];
          return c;
        },
        [&](std::size_t i) { return rt::ExecutorId{static_cast<std::uint32_t>(i % cfg.executors)}; });
    runtime->await_quiescence();

    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < clients.size(); ++i) runtime->send<NaiveClient>(clients[i], [](NaiveClient& c) { c.go(); });
    runtime->await_quiescence();
    const double makespan = seconds(slots->last_done() - t0);

    st = slots->verify();
    if (!st) return st;
    for (std::size_t i = 0; i < clients.size(); ++i) runtime->destroy(clients[i]);
    runtime->await_quiescence();

    BenchRecord r = record(Mode::naive, cfg, rep);
    r.makespan = makespan;
    r.throughput = makespan > 0 ? static_cast<double>(size) / makespan : 0.0;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace aggio::bench
