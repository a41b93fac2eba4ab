#include "common.hpp"

namespace aggio::bench {
namespace {

using namespace detail;

struct CkioClient : rt::Object {
  ckio::Input* io = nullptr;
  std::shared_ptr<Slots> slots;
  std::size_t index = 0;
  partition::ByteRange slice;
  std::vector<std::byte> buffer;

  void go(ckio::SessionHandle session) {
    Slot& slot = slots->slots[index];
    slot.offset = slice.start;
    slot.issued = Clock::now();
    io->read(session, slice.size(), slice.start, buffer,
             rt::Callback<ckio::ReadResult>::to<CkioClient>(self(), &CkioClient::landed));
  }

  void landed(ckio::ReadResult result) {
    Slot& slot = slots->slots[index];
    slot.done = Clock::now();
    slot.status = result.status;
    slot.data = std::move(buffer);
  }
};

}  // namespace

Rows bench_ckio(const BenchConfig& cfg) {
  Status st = validate(cfg);
  if (!st) return st;
  auto runtime = start_runtime(cfg);
  ckio::Input io(*runtime, input_options(cfg));

  std::vector<BenchRecord> rows;
  for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
    auto file = open_file(io, cfg.file, cfg.readers);
    if (!file) return file.status();
    const std::uint64_t size = file->size;
    auto parts = slices(size, cfg.clients);
    auto slots = std::make_shared<Slots>(cfg.clients);
    auto clients = runtime->create_array<CkioClient>(
        cfg.clients,
        [&](std::size_t i) {
          auto c = std::make_unique<CkioClient>();
          c->io = &io;
          c->slots = slots;
          c->index = i;
          c->slice = parts[i];
          c->buffer.resize(parts[i].size());  // allocated and touched before timing starts
          return c;
        },
        [&](std::size_t i) { return rt::ExecutorId{static_cast<std::uint32_t>(i % cfg.executors)}; });
    runtime->await_quiescence();

    const auto t0 = Clock::now();
    auto session = start_session(io, *file, size, 0);
    if (!session) return session.status();
    for (std::size_t i = 0; i < clients.size(); ++i)
      runtime->send<CkioClient>(clients[i], [s = *session](CkioClient& c) { c.go(s); });
    runtime->await_quiescence();
    const double makespan = seconds(slots->last_done() - t0);

    st = slots->verify();
    if (!st) return st;
    auto m = io.metrics_snapshot(*session);
    if ((st = close_session(io, *session)); !st) return st;
    if ((st = close_file(io, *file)); !st) return st;
    for (std::size_t i = 0; i < clients.size(); ++i) runtime->destroy(clients[i]);
    runtime->await_quiescence();

    BenchRecord r = record(Mode::ckio, cfg, rep);
    r.readers = cfg.readers;
    r.makespan = makespan;
    r.throughput = makespan > 0 ? static_cast<double>(size) / makespan : 0.0;
    r.io_time = m.io_time;
    r.permutation_time = m.permutation_time;
    r.overhead_time = m.overhead_time;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace aggio::bench
