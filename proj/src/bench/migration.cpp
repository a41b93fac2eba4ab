#include <thread>

#include "common.hpp"

namespace aggio::bench {
namespace {

using namespace detail;

struct PhaseLog {
  double seconds[2][2] = {};  // [phase][client]
  Status status[2][2];
};

struct MigratingClient : rt::Object {
  ckio::Input* io = nullptr;
  ckio::SessionHandle session;
  partition::ByteRange target;
  std::shared_ptr<PhaseLog> log;
  std::size_t index = 0;
  std::vector<std::byte> buffer;

  void go(int phase) {
    auto t0 = Clock::now();
    buffer.assign(target.size(), std::byte{0});
    io->read(session, target.size(), target.start, buffer,
             rt::Callback<ckio::ReadResult>::to<MigratingClient>(self(), [phase, t0](MigratingClient& c,
                                                                                     ckio::ReadResult r) {
               c.log->seconds[phase][c.index] = seconds(Clock::now() - t0);
               Status& st = c.log->status[phase][c.index];
               st = r.status;
               if (st.ok())
                 if (auto bad = pattern::first_mismatch(c.buffer, c.target.start))
                   st = mismatch("migration phase " + std::to_string(phase + 1), c.target.start + *bad);
             }));
  }
};

}  // namespace

Rows bench_migration(const BenchConfig& cfg) {
  Status st = validate(cfg);
  if (!st) return st;
  auto runtime = start_runtime(cfg);
  ckio::Input io(*runtime, input_options(cfg));
  const std::uint64_t rs = cfg.read_size;

  std::vector<BenchRecord> rows;
  for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
    auto file = open_file(io, cfg.file, 2);
    if (!file) return file.status();
    if (file->size < 2 * rs)
      return Error(ErrorCode::invalid_argument, "migration needs a file of at least 2 x read size bytes");
    // Reader b0 lands on executor 0 (node 0), b1 on executor 1 (node 1).
    auto session = start_session(io, *file, 2 * rs, 0);
    if (!session) return session.status();
    runtime->await_quiescence();  // both chunks in memory

    // c0 starts next to b0 but wants b1's bytes; c1 the reverse.
    auto log = std::make_shared<PhaseLog>();
    auto clients = runtime->create_array<MigratingClient>(
        2,
        [&](std::size_t i) {
          auto c = std::make_unique<MigratingClient>();
          c->io = &io;
          c->session = *session;
          c->target = i == 0 ? partition::ByteRange{rs, 2 * rs} : partition::ByteRange{0, rs};
          c->log = log;
          c->index = i;
          return c;
        },
        [](std::size_t i) { return rt::ExecutorId{static_cast<std::uint32_t>(i)}; });
    runtime->await_quiescence();

    const auto t0 = Clock::now();
    for (int c = 0; c < 2; ++c) runtime->send<MigratingClient>(clients[c], [](MigratingClient& m) { m.go(0); });
    runtime->await_quiescence();

    Waiter<Status> moved0, moved1;
    if ((st = runtime->migrate(clients[0], rt::ExecutorId{1}, moved0.callback())); !st) return st;
    if ((st = runtime->migrate(clients[1], rt::ExecutorId{0}, moved1.callback())); !st) return st;
    if ((st = moved0.get()); !st) return st;
    if ((st = moved1.get()); !st) return st;
    runtime->await_quiescence();

    const auto t1 = Clock::now();
    for (int c = 0; c < 2; ++c) runtime->send<MigratingClient>(clients[c], [](MigratingClient& m) { m.go(1); });
    runtime->await_quiescence();
    const auto t2 = Clock::now();

    for (auto& phase : log->status)
      for (Status& s : phase)
        if (!s) return s;
    if ((st = close_session(io, *session)); !st) return st;
    if ((st = close_file(io, *file)); !st) return st;
    for (std::size_t i = 0; i < clients.size(); ++i) runtime->destroy(clients[i]);
    runtime->await_quiescence();

    BenchRecord r = record(Mode::migration, cfg, rep);
    r.readers = 2;
    r.makespan = seconds((t1 - t0) + (t2 - t1));
    r.pre_migration_read_time = std::max(log->seconds[0][0], log->seconds[0][1]);
    r.post_migration_read_time = std::max(log->seconds[1][0], log->seconds[1][1]);
    r.throughput = static_cast<double>(4 * rs) / *r.makespan;
    rows.push_back(r);
  }
  return rows;
}

namespace {

struct ProbeLog {
  double io_seconds = 0.0;
  double net_seconds = 0.0;
  Status status;
};

struct Sink : rt::Object {
  std::shared_ptr<ProbeLog> log;

  void arrive(std::vector<std::byte> data, Clock::time_point sent) {
    log->net_seconds = seconds(Clock::now() - sent);
    if (auto bad = pattern::first_mismatch(data, 0)) log->status = mismatch("network copy", *bad);
  }
};

struct Source : rt::Object {
  std::shared_ptr<storage::Backend> backend;
  std::shared_ptr<ProbeLog> log;
  rt::ObjectRef sink;

  void go() {
    auto& runtime = rt::Runtime::current();
    runtime.io_started();
    std::thread([&runtime, me = self(), b = backend] {
      auto t0 = Clock::now();
      auto data = b->read_at(0, b->size());
      auto elapsed = Clock::now() - t0;
      runtime.send<Source>(me, [data = std::move(data), elapsed](Source& s) mutable {
        s.loaded(std::move(data), elapsed);
      });
      runtime.io_finished();
    }).detach();
  }

  void loaded(Result<std::vector<std::byte>> data, Duration elapsed) {
    log->io_seconds = seconds(elapsed);
    if (!data) {
      log->status = data.status();
      return;
    }
    if (auto bad = pattern::first_mismatch(*data, 0)) {
      log->status = mismatch("file read", *bad);
      return;
    }
    const std::size_t bytes = data->size();
    auto sent = Clock::now();
    rt::Runtime::current().send<Sink>(
        sink, [d = std::move(data).value(), sent](Sink& s) mutable { s.arrive(std::move(d), sent); }, bytes);
  }
};

}  // namespace

Rows bench_io_vs_net(const BenchConfig& cfg) {
  Status st = validate(cfg);
  if (!st) return st;
  auto runtime = start_runtime(cfg);
  const rt::ExecutorId far{cfg.executors - 1};
  if (runtime->node_of(far) == runtime->node_of(rt::ExecutorId{0}))
    return Error(ErrorCode::invalid_argument, "io-vs-net needs at least two nodes");
  auto factory = storage::make_factory(cfg.backend);
  auto backend = open_backend(cfg, factory);
  if (!backend) return backend.status();

  std::vector<BenchRecord> rows;
  for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
    auto log = std::make_shared<ProbeLog>();
    auto sink = runtime->create_object<Sink>(far, [&] {
      auto s = std::make_unique<Sink>();
      s->log = log;
      return s;
    });
    auto source = runtime->create_object<Source>(rt::ExecutorId{0}, [&] {
      auto s = std::make_unique<Source>();
      s->backend = *backend;
      s->log = log;
      s->sink = sink;
      return s;
    });
    runtime->await_quiescence();
    runtime->send<Source>(source, [](Source& s) { s.go(); });
    runtime->await_quiescence();
    if (!log->status) return log->status;
    runtime->destroy(source);
    runtime->destroy(sink);
    runtime->await_quiescence();

    BenchRecord r = record(Mode::io_vs_net, cfg, rep);
    r.io_time = log->io_seconds;
    r.permutation_time = log->net_seconds;
    r.makespan = log->io_seconds + log->net_seconds;
    r.throughput = log->io_seconds > 0 ? static_cast<double>((*backend)->size()) / log->io_seconds : 0.0;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace aggio::bench
