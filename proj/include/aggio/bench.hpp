#pragma once

// Benchmark drivers. Each driver starts its own runtime, runs
// cfg.repetitions repetitions, verifies every byte it read against the
// pattern rule and returns one record per repetition. A verification failure
// is reported as ErrorCode::data_mismatch; any bad knob as invalid_argument.

#include <chrono>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "aggio/ckio.hpp"
#include "aggio/status.hpp"
#include "aggio/storage.hpp"

namespace aggio::bench {

using Duration = std::chrono::steady_clock::duration;

enum class Mode { naive, ckio, overlap, migration, io_vs_net, pipeline };

const char* to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view name);

struct PatternFileSpec {
  std::string path;
  std::uint64_t size = 0;
};

// Writes `spec.size` bytes where byte x is x mod 251.
Status gen_file(const PatternFileSpec& spec);

struct BenchConfig {
  Mode mode = Mode::naive;
  std::uint32_t executors = 4;
  std::uint32_t executors_per_node = 0;  // 0: a single node
  Duration inter_node_latency{0};
  double inter_node_bandwidth = 1e9;  // bytes per second
  std::uint32_t clients = 1;          // total, over all executors
  std::uint32_t readers = 4;
  std::string file;
  storage::BackendSpec backend;
  std::uint32_t repetitions = 1;
  ckio::Routing routing = ckio::Routing::direct;

  // overlap
  bool blocking = false;              // clients read_at inline on their executor
  std::int64_t background_quanta = -1;  // per executor; -1 runs until the reads finish
  Duration quantum = std::chrono::microseconds(10);

  // migration
  std::uint64_t read_size = 1 * storage::MiB;

  // pipeline
  std::uint64_t block_size = 1 * storage::MiB;
  std::uint32_t segments = 0;  // 0: as many as the file holds
  Duration compute{0};         // per block
};

Status validate(const BenchConfig& cfg);

struct BenchRecord {
  std::string mode;
  std::uint32_t clients = 0;
  std::optional<std::uint32_t> readers;
  std::uint32_t repetition = 0;
  std::optional<double> makespan;  // seconds
  std::optional<double> throughput;  // bytes per second
  std::optional<double> background_fraction;
  std::optional<double> io_time;
  std::optional<double> permutation_time;
  std::optional<double> overhead_time;
  std::optional<double> pre_migration_read_time;
  std::optional<double> post_migration_read_time;
};

inline constexpr std::string_view kCsvHeader =
    "mode,clients,readers,repetition,makespan,throughput,background_fraction,io_time,permutation_time,"
    "overhead_time,pre_migration_read_time,post_migration_read_time";

void write_csv(std::ostream& out, const std::vector<BenchRecord>& rows);

// One line: mode plus mean and min of the headline metric over repetitions.
std::string summarize(const std::vector<BenchRecord>& rows);

using Rows = Result<std::vector<BenchRecord>>;

// `clients` tasks each read_at their disjoint slice of the whole file on a
// private I/O thread, bypassing the input library.
Rows bench_naive(const BenchConfig& cfg);

// One session over the whole file with cfg.readers readers; `clients` tasks
// read their disjoint slices through it.
Rows bench_ckio(const BenchConfig& cfg);

// Clients read the whole file while a background group runs ~10 us quanta on
// every executor. background_fraction is the share of executor time inside
// the read window spent in background quanta. makespan covers reads and any
// fixed background budget.
Rows bench_overlap(const BenchConfig& cfg);

// Two nodes, two readers, two clients reading the remote reader's chunk;
// then the clients swap executors and repeat the same reads locally.
Rows bench_migration(const BenchConfig& cfg);

// io_time: one read_at of the whole file. permutation_time: moving the same
// bytes in one cross-node invocation.
Rows bench_io_vs_net(const BenchConfig& cfg);

// cfg.clients workers consume blocks block-cyclically, one session per
// segment, each prefetching its next block before computing on the current
// one. background_fraction holds the share of read latency hidden by compute.
Rows demo_pipeline(const BenchConfig& cfg);

Rows run(const BenchConfig& cfg);

// Busy-loop iterations approximating `target`, measured once per process.
std::uint64_t calibrate_quantum(Duration target);
void spin(std::uint64_t iterations);

// Busy-loops for `d` of wall time, checking the clock every ~0.5 us.
void busy_for(Duration d);

}  // namespace aggio::bench
