#include "common.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace aggio::bench {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::naive: return "naive";
    case Mode::ckio: return "ckio";
    case Mode::overlap: return "overlap";
    case Mode::migration: return "migration";
    case Mode::io_vs_net: return "io-vs-net";
    case Mode::pipeline: return "pipeline";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : {Mode::naive, Mode::ckio, Mode::overlap, Mode::migration, Mode::io_vs_net, Mode::pipeline})
    if (name == to_string(m)) return m;
  return std::nullopt;
}

Status gen_file(const PatternFileSpec& spec) {
  if (spec.path.empty()) return Error(ErrorCode::invalid_argument, "gen: path is empty");
  return pattern::generate(spec.path, spec.size);
}

Status validate(const BenchConfig& cfg) {
  auto bad = [](std::string msg) { return Error(ErrorCode::invalid_argument, std::move(msg)); };
  if (cfg.executors == 0) return bad("executors must be >= 1");
  if (cfg.executors_per_node != 0 && cfg.executors % cfg.executors_per_node != 0)
    return bad("executors must be a multiple of executors per node");
  if (cfg.inter_node_latency < Duration::zero()) return bad("latency must be >= 0");
  if (!(cfg.inter_node_bandwidth > 0.0)) return bad("inter-node bandwidth must be > 0");
  if (cfg.clients == 0) return bad("clients must be >= 1");
  if (cfg.repetitions == 0) return bad("repetitions must be >= 1");
  if (cfg.file.empty()) return bad("no input file given");
  const bool uses_readers = cfg.mode == Mode::ckio || cfg.mode == Mode::pipeline ||
                            (cfg.mode == Mode::overlap && !cfg.blocking);
  if (uses_readers && cfg.readers == 0) return bad("readers must be >= 1");
  if (cfg.backend.kind == storage::BackendKind::simulated) {
    Status st = storage::validate(cfg.backend.sim);
    if (!st) return st;
  }
  if (cfg.mode == Mode::overlap && cfg.quantum <= Duration::zero()) return bad("quantum must be > 0");
  if (cfg.mode == Mode::migration) {
    if (cfg.executors != 2) return bad("migration runs on exactly 2 executors");
    if (cfg.executors_per_node != 1) return bad("migration needs 2 nodes (1 executor per node)");
    if (cfg.read_size == 0) return bad("read size must be > 0");
  }
  if (cfg.mode == Mode::io_vs_net && cfg.executors < 2) return bad("io-vs-net needs 2 executors");
  if (cfg.mode == Mode::pipeline && cfg.block_size == 0) return bad("block size must be > 0");
  if (cfg.compute < Duration::zero()) return bad("compute must be >= 0");
  return Status::Ok();
}

namespace {

void put(std::ostream& out, const std::optional<double>& v) {
  out << ',';
  if (!v) return;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  out << buf;
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<BenchRecord>& rows) {
  out << kCsvHeader << '\n';
  for (const BenchRecord& r : rows) {
    out << r.mode << ',' << r.clients << ',';
    if (r.readers) out << *r.readers;
    out << ',' << r.repetition;
    put(out, r.makespan);
    put(out, r.throughput);
    put(out, r.background_fraction);
    put(out, r.io_time);
    put(out, r.permutation_time);
    put(out, r.overhead_time);
    put(out, r.pre_migration_read_time);
    put(out, r.post_migration_read_time);
    out << '\n';
  }
}

std::string summarize(const std::vector<BenchRecord>& rows) {
  if (rows.empty()) return "no rows";
  std::ostringstream out;
  auto stat = [&](const char* name, auto field) {
    std::vector<double> v;
    for (const BenchRecord& r : rows)
      if (auto x = field(r)) v.push_back(*x);
    if (v.empty()) return;
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double min = *std::min_element(v.begin(), v.end());
    char buf[128];
    std::snprintf(buf, sizeof buf, " %s mean=%.6g min=%.6g", name, mean, min);
    out << buf;
  };
  const BenchRecord& first = rows.front();
  out << first.mode << " clients=" << first.clients;
  if (first.readers) out << " readers=" << *first.readers;
  out << " reps=" << rows.size();
  stat("makespan", [](const BenchRecord& r) { return r.makespan; });
  stat("throughput", [](const BenchRecord& r) { return r.throughput; });
  stat("background_fraction", [](const BenchRecord& r) { return r.background_fraction; });
  stat("pre", [](const BenchRecord& r) { return r.pre_migration_read_time; });
  stat("post", [](const BenchRecord& r) { return r.post_migration_read_time; });
  if (first.mode == to_string(Mode::io_vs_net))
    stat("io/net", [](const BenchRecord& r) -> std::optional<double> {
      if (!r.io_time || !r.permutation_time || *r.permutation_time <= 0.0) return std::nullopt;
      return *r.io_time / *r.permutation_time;
    });
  return out.str();
}

Rows run(const BenchConfig& cfg) {
  switch (cfg.mode) {
    case Mode::naive: return bench_naive(cfg);
    case Mode::ckio: return bench_ckio(cfg);
    case Mode::overlap: return bench_overlap(cfg);
    case Mode::migration: return bench_migration(cfg);
    case Mode::io_vs_net: return bench_io_vs_net(cfg);
    case Mode::pipeline: return demo_pipeline(cfg);
  }
  return Error(ErrorCode::invalid_argument, "unknown mode");
}

void spin(std::uint64_t iterations) {
  volatile std::uint64_t sink = 0;
  for (std::uint64_t i = 0; i < iterations; ++i) sink = sink + i;
}

std::uint64_t calibrate_quantum(Duration target) {
  static const double per_second = [] {
    // Median of several ~2 ms trials: the spin rate drifts on shared hosts.
    std::vector<double> rates;
    for (int trial = 0; trial < 15; ++trial) {
      const std::uint64_t n = 1'000'000;
      auto t0 = std::chrono::steady_clock::now();
      spin(n);
      double dt = detail::seconds(std::chrono::steady_clock::now() - t0);
      if (dt > 0) rates.push_back(static_cast<double>(n) / dt);
    }
    if (rates.empty()) return 1e9;
    std::nth_element(rates.begin(), rates.begin() + rates.size() / 2, rates.end());
    return rates[rates.size() / 2];
  }();
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(per_second * detail::seconds(target))));
}

void busy_for(Duration d) {
  static const std::uint64_t stride = calibrate_quantum(std::chrono::nanoseconds(500));
  const auto until = std::chrono::steady_clock::now() + d;
  do spin(stride);
  while (std::chrono::steady_clock::now() < until);
}

namespace detail {

std::unique_ptr<rt::Runtime> start_runtime(const BenchConfig& cfg) {
  rt::RuntimeConfig rc;
  rc.num_executors = cfg.executors;
  rc.executors_per_node = cfg.executors_per_node == 0 ? cfg.executors : cfg.executors_per_node;
  rc.inter_node_latency = cfg.inter_node_latency;
  rc.inter_node_bandwidth = cfg.inter_node_bandwidth;
  return rt::Runtime::start(rc);
}

Result<std::shared_ptr<storage::Backend>> open_backend(const BenchConfig& cfg,
                                                       const storage::BackendFactory& factory) {
  return factory(cfg.file);
}

ckio::InputOptions input_options(const BenchConfig& cfg) {
  ckio::InputOptions opts;
  opts.backends = storage::make_factory(cfg.backend);
  opts.routing = cfg.routing;
  return opts;
}

Result<ckio::FileHandle> open_file(ckio::Input& io, const std::string& path, std::uint32_t readers) {
  Waiter<Result<ckio::FileHandle>> w;
  io.open(path, w.callback(), ckio::FileOptions{readers});
  return w.get();
}

Result<ckio::SessionHandle> start_session(ckio::Input& io, const ckio::FileHandle& f, std::uint64_t bytes,
                                          std::uint64_t offset) {
  Waiter<Result<ckio::SessionHandle>> w;
  io.start_read_session(f, bytes, offset, w.callback());
  return w.get();
}

Status close_session(ckio::Input& io, const ckio::SessionHandle& s) {
  Waiter<Status> w;
  io.close_read_session(s, w.callback());
  return w.get();
}

Status close_file(ckio::Input& io, const ckio::FileHandle& f) {
  Waiter<Status> w;
  io.close(f, w.callback());
  return w.get();
}

std::vector<partition::ByteRange> slices(std::uint64_t size, std::uint32_t n) {
  std::vector<partition::ByteRange> out;
  partition::SessionExtent extent{0, size, n};
  for (std::uint32_t i = 0; i < n; ++i) {
    out.push_back(partition::chunk_bounds(extent, i).range());
  }
  return out;
}

Status mismatch(std::string_view what, std::uint64_t offset) {
  return Error(ErrorCode::data_mismatch,
               std::string(what) + ": byte at file offset " + std::to_string(offset) + " breaks the pattern");
}

BenchRecord record(Mode mode, const BenchConfig& cfg, std::uint32_t repetition) {
  BenchRecord r;
  r.mode = to_string(mode);
  r.clients = cfg.clients;
  r.repetition = repetition;
  return r;
}

}  // namespace detail
}  // namespace aggio::bench
