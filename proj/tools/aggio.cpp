// aggio: pattern-file generation and the benchmark drivers.
//
//   aggio gen --size 64MiB --path /tmp/input.bin
//   aggio bench ckio --executors 4 --clients 64 --readers 16 --backend sim
//         --file /tmp/input.bin --reps 10 --csv out.csv
//
// Exit status: 0 verified success, 1 verification or run failure, 2 bad configuration.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "aggio/bench.hpp"

namespace {

using namespace aggio;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfig = 2;

std::chrono::steady_clock::duration millis(double ms) {
  return std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double, std::milli>(ms));
}

int exit_code(const Status& st) {
  switch (st.code()) {
    case ErrorCode::ok: return kOk;
    case ErrorCode::invalid_argument:
    case ErrorCode::out_of_range:
    case ErrorCode::not_found: return kConfig;
    default: return kFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phase parallel file input: benchmarks and tools"};
  app.require_subcommand(1);

  std::uint64_t gen_size = 0;
  std::string gen_path;
  auto* gen = app.add_subcommand("gen", "write a pattern file (byte x = x mod 251)");
  gen->add_option("--size", gen_size, "bytes, e.g. 64MiB")->required()->transform(CLI::AsSizeValue(false));
  gen->add_option("--path", gen_path, "output file")->required();

  bench::BenchConfig cfg;
  cfg.backend.sim = storage::SimBackendConfig{};
  std::string mode_name, backend = "os", routing = "direct", csv_path;
  std::uint32_t nodes = 1;
  double latency_ms = 0.0, overhead_ms = 1.0, compute_ms = 0.0, quantum_us = 10.0;

  auto* b = app.add_subcommand("bench", "run one benchmark mode");
  b->add_option("mode", mode_name, "naive | ckio | overlap | migration | io-vs-net | pipeline")->required();
  b->add_option("--executors", cfg.executors, "executor threads")->capture_default_str();
  b->add_option("--nodes", nodes, "emulated nodes; executors are split evenly")->capture_default_str();
  b->add_option("--latency", latency_ms, "inter-node latency, ms")->capture_default_str();
  b->add_option("--net-bandwidth", cfg.inter_node_bandwidth, "inter-node bandwidth, bytes/s")->capture_default_str();
  b->add_option("--clients", cfg.clients, "client tasks (workers for pipeline)")->capture_default_str();
  b->add_option("--readers", cfg.readers, "buffer readers per session")->capture_default_str();
  b->add_option("--backend", backend, "os | sim")->check(CLI::IsMember({"os", "sim"}))->capture_default_str();
  b->add_option("--stripes", cfg.backend.sim.stripes, "sim: stripe servers")->capture_default_str();
  b->add_option("--stripe-width", cfg.backend.sim.stripe_width, "sim: stripe block size")
      ->transform(CLI::AsSizeValue(false))
      ->capture_default_str();
  b->add_option("--overhead", overhead_ms, "sim: per-request overhead, ms")->capture_default_str();
  b->add_option("--bandwidth", cfg.backend.sim.stream_bandwidth, "sim: per-stripe bandwidth, bytes/s")
      ->capture_default_str();
  b->add_option("--window", cfg.backend.sim.client_window, "sim: pieces one request keeps in flight (0 = all)")
      ->capture_default_str();
  b->add_option("--file", cfg.file, "pattern file to read")->required();
  b->add_option("--reps", cfg.repetitions, "repetitions")->capture_default_str();
  b->add_option("--routing", routing, "direct | broadcast")
      ->check(CLI::IsMember({"direct", "broadcast"}))
      ->capture_default_str();
  b->add_option("--csv", csv_path, "CSV output path (default: stdout)");
  b->add_flag("--blocking", cfg.blocking, "overlap: clients block their executor in read_at");
  b->add_option("--quanta", cfg.background_quanta, "overlap: background quanta per executor (-1 = until reads end)")
      ->capture_default_str();
  b->add_option("--quantum", quantum_us, "overlap: background quantum, us")->capture_default_str();
  b->add_option("--read-size", cfg.read_size, "migration: bytes per read")
      ->transform(CLI::AsSizeValue(false))
      ->capture_default_str();
  b->add_option("--block-size", cfg.block_size, "pipeline: block bytes")
      ->transform(CLI::AsSizeValue(false))
      ->capture_default_str();
  b->add_option("--segments", cfg.segments, "pipeline: segments (0 = whole file)")->capture_default_str();
  b->add_option("--compute", compute_ms, "pipeline: compute per block, ms")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  if (gen->parsed()) {
    Status st = bench::gen_file({gen_path, gen_size});
    if (!st) {
      std::cerr << "aggio gen: " << st.to_string() << '\n';
      return exit_code(st) == kOk ? kFailed : kConfig;
    }
    return kOk;
  }

  auto mode = bench::parse_mode(mode_name);
  if (!mode) {
    std::cerr << "aggio bench: unknown mode '" << mode_name << "'\n";
    return kConfig;
  }
  cfg.mode = *mode;
  if (nodes == 0 || cfg.executors % nodes != 0) {
    std::cerr << "aggio bench: executors (" << cfg.executors << ") must split evenly over " << nodes << " nodes\n";
    return kConfig;
  }
  cfg.executors_per_node = cfg.executors / nodes;
  cfg.inter_node_latency = millis(latency_ms);
  cfg.backend.kind = backend == "sim" ? storage::BackendKind::simulated : storage::BackendKind::os_file;
  cfg.backend.sim.per_request_overhead = millis(overhead_ms);
  cfg.routing = routing == "broadcast" ? ckio::Routing::broadcast : ckio::Routing::direct;
  cfg.compute = millis(compute_ms);
  cfg.quantum = millis(quantum_us / 1000.0);

  bench::Rows rows = [&]() -> bench::Rows {
    try {
      return bench::run(cfg);
    } catch (const rt::ConfigError& e) {
      return Error(ErrorCode::invalid_argument, e.what());
    } catch (const std::exception& e) {
      return Error(ErrorCode::io_error, e.what());
    }
  }();
  if (!rows) {
    std::cerr << "aggio bench " << mode_name << ": " << rows.status().to_string() << '\n';
    return exit_code(rows.status());
  }

  if (csv_path.empty()) {
    bench::write_csv(std::cout, *rows);
    std::cerr << bench::summarize(*rows) << '\n';
  } else {
    std::ofstream out(csv_path);
    if (!out) {
      std::cerr << "aggio bench: cannot write " << csv_path << '\n';
      return kConfig;
    }
    bench::write_csv(out, *rows);
    std::cout << bench::summarize(*rows) << '\n';
  }
  return kOk;
}
