#include <atomic>

#include "common.hpp"

namespace aggio::bench {
namespace {

using namespace detail;

using Interval = std::pair<Clock::time_point, Clock::time_point>;

struct BackgroundLog {
  explicit BackgroundLog(std::size_t executors) : quanta(executors), finished(executors) {}
  std::vector<std::vector<Interval>> quanta;
  std::vector<Clock::time_point> finished;
};

// One per executor. Each quantum re-enqueues the next, so any other task on
// the executor gets a turn between quanta.
struct Background : rt::Object {
  std::shared_ptr<BackgroundLog> log;
  std::uint32_t executor = 0;
  Duration quantum{};
  bool running = false;
  std::int64_t remaining = -1;

  void begin(std::shared_ptr<BackgroundLog> l, std::int64_t budget) {
    log = std::move(l);
    remaining = budget;
    running = budget != 0;
    log->finished[executor] = Clock::now();
    if (running) next();
  }

  void tick() {
    if (!running) return;
    auto t0 = Clock::now();
    busy_for(quantum);
    auto t1 = Clock::now();
    log->quanta[executor].push_back({t0, t1});
    log->finished[executor] = t1;
    if (remaining > 0 && --remaining == 0) {
      running = false;
      return;
    }
    next();
  }

  void stop() { running = false; }

  void next() {
    rt::Runtime::current().send<Background>(self(), [](Background& b) { b.tick(); });
  }
};

struct ReadState {
  explicit ReadState(std::size_t n) : slots(n), remaining(n) {}
  Slots slots;
  std::atomic<std::size_t> remaining;
  rt::Group<Background> background;
  bool continuous = false;

  void finished_one() {
    if (remaining.fetch_sub(1) == 1 && continuous)
      rt::Runtime::current().broadcast<Background>(background, [](Background& b) { b.stop(); });
  }
};

struct OverlapClient : rt::Object {
  std::shared_ptr<ReadState> state;
  std::size_t index = 0;
  partition::ByteRange slice;
  std::vector<std::byte> buffer;

  Slot& slot() { return state->slots.slots[index]; }

  void go_async(ckio::Input* io, ckio::SessionHandle session) {
    slot().offset = slice.start;
    slot().issued = Clock::now();
    io->read(session, slice.size(), slice.start, buffer,
             rt::Callback<ckio::ReadResult>::to<OverlapClient>(self(), &OverlapClient::landed));
  }

  void landed(ckio::ReadResult result) {
    slot().done = Clock::now();
    slot().status = result.status;
    slot().data = std::move(buffer);
    state->finished_one();
  }

  // Holds the executor for the whole read.
  void go_blocking(std::shared_ptr<storage::Backend> backend) {
    slot().offset = slice.start;
    slot().issued = Clock::now();
    auto data = backend->read_at(slice.start, slice.size());
    slot().done = Clock::now();
    if (data)
      slot().data = std::move(data).value();
    else
      slot().status = data.status();
    state->finished_one();
  }
};

double overlap_seconds(const std::vector<Interval>& quanta, Clock::time_point w0, Clock::time_point w1) {
  double total = 0.0;
  for (const auto& [a, b] : quanta) {
    auto lo = std::max(a, w0);
    auto hi = std::min(b, w1);
    if (hi > lo) total += seconds(hi - lo);
  }
  return total;
}

}  // namespace

Rows bench_overlap(const BenchConfig& cfg) {
  Status st = validate(cfg);
  if (!st) return st;
  auto runtime = start_runtime(cfg);
  ckio::Input io(*runtime, input_options(cfg));
  auto factory = storage::make_factory(cfg.backend);
  std::shared_ptr<storage::Backend> backend;
  if (cfg.blocking) {
    auto b = open_backend(cfg, factory);
    if (!b) return b.status();
    backend = std::move(b).value();
  }

  auto background = runtime->create_group<Background>([&](rt::ExecutorId e) {
    auto b = std::make_unique<Background>();
    b->executor = e.index;
    b->quantum = cfg.quantum;
    return b;
  });

  std::vector<BenchRecord> rows;
  for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
    std::optional<ckio::FileHandle> file;
    std::uint64_t size = 0;
    if (cfg.blocking) {
      size = backend->size();
    } else {
      auto f = open_file(io, cfg.file, cfg.readers);
      if (!f) return f.status();
      file = *f;
      size = f->size;
    }
    auto parts = slices(size, cfg.clients);
    auto state = std::make_shared<ReadState>(cfg.clients);
    state->background = background;
    state->continuous = cfg.background_quanta < 0;
    auto clients = runtime->create_array<OverlapClient>(
        cfg.clients,
        [&](std::size_t i) {
          auto c = std::make_unique<OverlapClient>();
          c->state = state;
          c->index = i;
          c->slice = parts[i];
          c->buffer.resize(parts[i].size());  // allocated and touched before timing starts
          return c;
        },
        [&](std::size_t i) { return rt::ExecutorId{static_cast<std::uint32_t>(i % cfg.executors)}; });
    runtime->await_quiescence();
    busy_for(Duration::zero());  // calibrates outside the window

    auto log = std::make_shared<BackgroundLog>(cfg.executors);
    const auto t0 = Clock::now();
    std::optional<ckio::SessionHandle> session;
    if (cfg.blocking) {
      // One kickoff per executor starts its background work and then its own
      // clients, so the main thread's sends cannot trail the first quanta.
      std::vector<std::vector<rt::ObjectRef>> local(cfg.executors);
      for (std::size_t i = 0; i < clients.size(); ++i) local[i % cfg.executors].push_back(clients[i]);
      runtime->broadcast<Background>(background, [log, budget = cfg.background_quanta, local, backend](Background& b) {
        b.begin(log, budget);
        for (rt::ObjectRef c : local[b.executor])
          rt::Runtime::current().send<OverlapClient>(c, [backend](OverlapClient& oc) { oc.go_blocking(backend); });
      });
    } else {
      runtime->broadcast<Background>(background,
                                     [log, budget = cfg.background_quanta](Background& b) { b.begin(log, budget); });
      auto s = start_session(io, *file, size, 0);
      if (!s) return s.status();
      session = *s;
      for (std::size_t i = 0; i < clients.size(); ++i)
        runtime->send<OverlapClient>(clients[i], [io = &io, s = *s](OverlapClient& c) { c.go_async(io, s); });
    }
    runtime->await_quiescence();

    const auto w1 = state->slots.last_done();
    Clock::time_point end = w1;
    if (cfg.background_quanta > 0)
      for (auto t : log->finished) end = std::max(end, t);
    double busy = 0.0;
    for (const auto& q : log->quanta) busy += overlap_seconds(q, t0, w1);
    const double window = seconds(w1 - t0);

    st = state->slots.verify();
    if (!st) return st;
    BenchRecord r = record(Mode::overlap, cfg, rep);
    r.makespan = seconds(end - t0);
    r.throughput = window > 0 ? static_cast<double>(size) / window : 0.0;
    r.background_fraction = window > 0 ? busy / (window * cfg.executors) : 0.0;
    if (session) {
      auto m = io.metrics_snapshot(*session);
      r.readers = cfg.readers;
      r.io_time = m.io_time;
      r.permutation_time = m.permutation_time;
      r.overhead_time = m.overhead_time;
      if ((st = close_session(io, *session)); !st) return st;
      if ((st = close_file(io, *file)); !st) return st;
    } else {
      double io_time = 0.0;
      for (const Slot& s : state->slots.slots) io_time += seconds(s.done - s.issued);
      r.io_time = io_time;
    }
    for (std::size_t i = 0; i < clients.size(); ++i) runtime->destroy(clients[i]);
    runtime->await_quiescence();
    rows.push_back(r);
  }
  return rows;
}

}  // namespace aggio::bench
