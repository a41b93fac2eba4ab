#include "common.hpp"

namespace aggio::bench {
namespace {

using namespace detail;

struct WorkerLog {
  double latency = 0.0;  // want -> bytes in hand, summed over blocks
  double stall = 0.0;    // idle waiting for a block, summed
  std::uint32_t completed = 0;
  Status status;
};

struct PipelineLog {
  explicit PipelineLog(std::size_t n) : workers(n) {}
  std::vector<WorkerLog> workers;
  Status status;
  Clock::time_point last_done{};
  std::mutex mutex;

  void done(Clock::time_point t) {
    std::lock_guard lock(mutex);
    last_done = std::max(last_done, t);
  }
};

struct Worker;

// Starts each segment's session on first demand and closes it once every
// worker holds its block. At most two sessions are open at a time.
struct Coordinator : rt::Object {
  enum class State { idle, starting, ready };
  struct Segment {
    State state = State::idle;
    ckio::SessionHandle handle;
    std::vector<rt::ObjectRef> waiting;
    std::uint32_t delivered = 0;
  };

  ckio::Input* io = nullptr;
  ckio::FileHandle file;
  std::uint32_t workers = 1;
  std::uint64_t block = 0;
  std::vector<Segment> segments;
  std::shared_ptr<PipelineLog> log;

  void want(std::uint32_t seg, rt::ObjectRef worker);
  void started(std::uint32_t seg, Result<ckio::SessionHandle> session);
  void block_done(std::uint32_t seg);
  void close(std::uint32_t seg);
};

struct Worker : rt::Object {
  std::uint32_t index = 0;
  std::uint32_t segments = 0;
  std::uint64_t block = 0;
  Duration compute{0};
  ckio::Input* io = nullptr;
  rt::ObjectRef coordinator;
  std::shared_ptr<PipelineLog> log;

  std::vector<std::byte> buffers[2];
  std::vector<Clock::time_point> wanted_at;
  std::vector<bool> arrived_flags;
  bool waiting = false;
  std::uint32_t waiting_for = 0;
  Clock::time_point wait_start{};
  Clock::time_point deadline{};

  WorkerLog& mine() { return log->workers[index]; }

  void start() {
    wanted_at.assign(segments, {});
    arrived_flags.assign(segments, false);
    request(0);
    wait_for(0);
  }

  void request(std::uint32_t seg) {
    wanted_at[seg] = Clock::now();
    rt::Runtime::current().send<Coordinator>(coordinator, [seg, me = self()](Coordinator& c) { c.want(seg, me); });
  }

  void have_session(std::uint32_t seg, ckio::SessionHandle session) {
    auto& buf = buffers[seg % 2];
    buf.resize(block);
    const std::uint64_t offset = session.extent.file_offset + index * block;
    io->read(session, block, offset, buf,
             rt::Callback<ckio::ReadResult>::to<Worker>(
                 self(), [seg, offset](Worker& w, ckio::ReadResult r) { w.arrived(seg, offset, r); }));
  }

  void arrived(std::uint32_t seg, std::uint64_t offset, const ckio::ReadResult& r) {
    auto now = Clock::now();
    mine().latency += seconds(now - wanted_at[seg]);
    arrived_flags[seg] = true;
    if (!r.status) {
      mine().status = r.status;
    } else if (auto bad = pattern::first_mismatch(buffers[seg % 2], offset)) {
      mine().status = mismatch("pipeline block", offset + *bad);
    }
    rt::Runtime::current().send<Coordinator>(coordinator, [seg](Coordinator& c) { c.block_done(seg); });
    if (waiting && waiting_for == seg) {
      waiting = false;
      mine().stall += seconds(now - wait_start);
      begin_compute(seg);
    }
  }

  void wait_for(std::uint32_t seg) {
    waiting = true;
    waiting_for = seg;
    wait_start = Clock::now();
  }

  void begin_compute(std::uint32_t seg) {
    if (seg + 1 < segments) request(seg + 1);
    deadline = Clock::now() + compute;
    compute_slice(seg);
  }

  // Computes in short slices so fragments for the next block get a turn.
  void compute_slice(std::uint32_t seg) {
    const auto stop = std::min(deadline, Clock::now() + std::chrono::microseconds(500));
    while (Clock::now() < stop) {
    }
    if (Clock::now() < deadline) {
      rt::Runtime::current().send<Worker>(self(), [seg](Worker& w) { w.compute_slice(seg); });
      return;
    }
    ++mine().completed;
    if (seg + 1 == segments) {
      log->done(Clock::now());
    } else if (arrived_flags[seg + 1]) {
      begin_compute(seg + 1);
    } else {
      wait_for(seg + 1);
    }
  }
};

void Coordinator::want(std::uint32_t seg, rt::ObjectRef worker) {
  Segment& s = segments[seg];
  if (s.state == State::ready) {
    rt::Runtime::current().send<Worker>(worker, [seg, h = s.handle](Worker& w) { w.have_session(seg, h); });
    return;
  }
  s.waiting.push_back(worker);
  if (s.state == State::starting) return;
  s.state = State::starting;
  const std::uint64_t span = static_cast<std::uint64_t>(workers) * block;
  io->start_read_session(file, span, seg * span,
                         rt::Callback<Result<ckio::SessionHandle>>::to<Coordinator>(
                             self(), [seg](Coordinator& c, Result<ckio::SessionHandle> r) { c.started(seg, r); }));
}

void Coordinator::started(std::uint32_t seg, Result<ckio::SessionHandle> session) {
  Segment& s = segments[seg];
  if (!session) {
    log->status = session.status();
    return;
  }
  s.state = State::ready;
  s.handle = *session;
  for (rt::ObjectRef w : s.waiting)
    rt::Runtime::current().send<Worker>(w, [seg, h = s.handle](Worker& wk) { wk.have_session(seg, h); });
  s.waiting.clear();
}

void Coordinator::block_done(std::uint32_t seg) {
  if (++segments[seg].delivered == workers) close(seg);
}

void Coordinator::close(std::uint32_t seg) {
  io->close_read_session(segments[seg].handle,
                         rt::Callback<Status>::to<Coordinator>(self(), [seg](Coordinator& c, Status st) {
                           if (st.code() == ErrorCode::busy)
                             c.close(seg);
                           else if (!st)
                             c.log->status = st;
                         }));
}

}  // namespace

Rows demo_pipeline(const BenchConfig& cfg) {
  Status st = validate(cfg);
  if (!st) return st;
  auto runtime = start_runtime(cfg);
  ckio::Input io(*runtime, input_options(cfg));
  const std::uint32_t n = cfg.clients;

  std::vector<BenchRecord> rows;
  for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
    auto file = open_file(io, cfg.file, cfg.readers);
    if (!file) return file.status();
    const std::uint64_t span = static_cast<std::uint64_t>(n) * cfg.block_size;
    const std::uint64_t fits = file->size / span;
    const std::uint32_t segments = cfg.segments == 0 ? static_cast<std::uint32_t>(fits) : cfg.segments;
    if (segments == 0 || segments > fits)
      return Error(ErrorCode::invalid_argument, "file too small for the requested pipeline segments");

    auto log = std::make_shared<PipelineLog>(n);
    auto coordinator = runtime->create_object<Coordinator>(rt::ExecutorId{0}, [&] {
      auto c = std::make_unique<Coordinator>();
      c->io = &io;
      c->file = *file;
      c->workers = n;
      c->block = cfg.block_size;
      c->segments.resize(segments);
      c->log = log;
      return c;
    });
    auto workers = runtime->create_array<Worker>(
        n,
        [&](std::size_t i) {
          auto w = std::make_unique<Worker>();
          w->index = static_cast<std::uint32_t>(i);
          w->segments = segments;
          w->block = cfg.block_size;
          w->compute = cfg.compute;
          w->io = &io;
          w->coordinator = coordinator;
          w->log = log;
          return w;
        },
        [&](std::size_t i) { return rt::ExecutorId{static_cast<std::uint32_t>(i % cfg.executors)}; });
    runtime->await_quiescence();

    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < workers.size(); ++i) runtime->send<Worker>(workers[i], [](Worker& w) { w.start(); });
    runtime->await_quiescence();

    if (!log->status) return log->status;
    double latency = 0.0, stall = 0.0;
    for (const WorkerLog& w : log->workers) {
      if (!w.status) return w.status;
      if (w.completed != segments) return Error(ErrorCode::io_error, "pipeline stalled before the last segment");
      latency += w.latency;
      stall += w.stall;
    }
    if ((st = close_file(io, *file)); !st) return st;
    for (std::size_t i = 0; i < workers.size(); ++i) runtime->destroy(workers[i]);
    runtime->destroy(coordinator);
    runtime->await_quiescence();

    BenchRecord r = record(Mode::pipeline, cfg, rep);
    r.readers = cfg.readers;
    const double makespan = seconds(log->last_done - t0);
    r.makespan = makespan;
    r.throughput = makespan > 0 ? static_cast<double>(segments * span) / makespan : 0.0;
    r.background_fraction = latency > 0 ? std::clamp(1.0 - stall / latency, 0.0, 1.0) : 0.0;
    r.io_time = latency;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace aggio::bench
