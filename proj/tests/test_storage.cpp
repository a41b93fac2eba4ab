#include <doctest.h>

#include <random>
#include <thread>

#include "aggio/pattern.hpp"
#include "aggio/storage.hpp"
#include "sim_harness.hpp"
#include "support.hpp"

using namespace aggio;
using namespace aggio::storage;
using aggio::testing::ms;
using aggio::testing::within;
using namespace std::chrono_literals;

namespace {

SimBackendConfig desk_config(const std::string& backing, std::uint32_t window) {
  SimBackendConfig cfg;
  cfg.stripes = 4;
  cfg.stripe_width = 1 * MiB;
  cfg.per_request_overhead = 1ms;
  cfg.stream_bandwidth = 100e6;
  cfg.client_window = window;
  cfg.backing = backing;
  return cfg;
}

double timed_read(Backend& b, std::uint64_t off, std::uint64_t len) {
  auto t0 = Clock::now();
  auto r = b.read_at(off, len);
  REQUIRE(r.ok());
  return ms(Clock::now() - t0);
}

double throughput(const SimBackendConfig& cfg, std::uint64_t file, std::uint64_t clients) {
  std::vector<ReadAt> reqs;
  for (std::uint64_t c = 0; c < clients; ++c) reqs.push_back({c * (file / clients), file / clients, Duration{0}});
  return static_cast<double>(file) / std::chrono::duration<double>(predict_makespan(cfg, reqs)).count();
}

}  // namespace

TEST_SUITE("storage") {
  TEST_CASE("os backend returns exact pattern bytes") {
    auto path = aggio::testing::pattern_file(1 * MiB);
    auto backend = open_os_file(path);
    REQUIRE(backend.ok());
    Backend& b = **backend;
    CHECK(b.size() == 1 * MiB);

    auto empty = b.read_at(0, 0);
    REQUIRE(empty.ok());
    CHECK(empty->empty());

    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
      std::uint64_t off = rng() % b.size();
      std::uint64_t len = rng() % (b.size() - off + 1);
      auto r = b.read_at(off, len);
      REQUIRE(r.ok());
      REQUIRE(r->size() == len);
      CHECK(pattern::verify(*r, off));
    }
    auto a1 = b.read_at(1000, 5000), a2 = b.read_at(1000, 5000);
    CHECK(*a1 == *a2);
  }

  TEST_CASE("read_at errors") {
    auto path = aggio::testing::pattern_file(4096);
    auto b = open_os_file(path);
    REQUIRE(b.ok());
    CHECK((*b)->read_at(4000, 200).status().code() == ErrorCode::out_of_range);
    CHECK((*b)->read_at(5000, 0).status().code() == ErrorCode::out_of_range);
    CHECK(open_os_file("/nonexistent/aggio.bin").status().code() == ErrorCode::not_found);
    CHECK_FALSE(open_simulated(desk_config("/nonexistent/aggio.bin", 0)).ok());
    SimBackendConfig bad = desk_config(path, 0);
    bad.stripes = 0;
    CHECK(validate(bad).code() == ErrorCode::invalid_argument);
  }

  TEST_CASE("split_by_stripe cuts at block boundaries, round-robin stripes") {
    SimBackendConfig cfg = desk_config("", 0);
    auto pieces = split_by_stripe(cfg, MiB - 10, 2 * MiB + 20);
    REQUIRE(pieces.size() == 4);
    CHECK(pieces[0].stripe == 0);
    CHECK(pieces[0].length == 10);
    CHECK(pieces[1].stripe == 1);
    CHECK(pieces[1].length == MiB);
    CHECK(pieces[2].stripe == 2);
    CHECK(pieces[3].stripe == 3);
    CHECK(pieces[3].length == 10);
    CHECK(split_by_stripe(cfg, 4 * MiB, 1)[0].stripe == 0);
  }

  TEST_CASE("predict_makespan: analytic cases") {
    SimBackendConfig cfg = desk_config("", 0);
    CHECK(predict_makespan(cfg, {}) == Duration{0});

    // 1 MB in one stripe: o + n/b = 1 ms + 10 ms.
    std::vector<ReadAt> one{{0, 1'000'000, Duration{0}}};
    CHECK(ms(predict_makespan(cfg, one)) == doctest::Approx(11.0).epsilon(1e-6));

    // 2 MiB over two stripes in parallel vs one stripe at a time.
    std::vector<ReadAt> two{{0, 2 * MiB, Duration{0}}};
    const double per_stripe = 1.0 + 1e3 * static_cast<double>(MiB) / 100e6;
    CHECK(ms(predict_makespan(cfg, two)) == doctest::Approx(per_stripe).epsilon(1e-6));
    CHECK(ms(predict_makespan(desk_config("", 1), two)) == doctest::Approx(2 * per_stripe).epsilon(1e-6));

    // Same stripe twice: FIFO, the second finishes at 2(o + n/b).
    std::vector<ReadAt> same{{0, 1'000'000, Duration{0}}, {0, 1'000'000, Duration{0}}};
    CHECK(ms(predict_makespan(cfg, same)) == doctest::Approx(22.0).epsilon(1e-6));

    // Four distinct stripes at once: perfect parallelism.
    std::vector<ReadAt> four;
    for (std::uint64_t s = 0; s < 4; ++s) four.push_back({s * MiB, 500'000, Duration{0}});
    CHECK(ms(predict_makespan(cfg, four)) == doctest::Approx(6.0).epsilon(1e-6));

    // 4096 x 1 KiB: 1024 per stripe, each paying the overhead.
    std::vector<ReadAt> tiny;
    for (std::uint64_t i = 0; i < 4096; ++i) tiny.push_back({i * KiB, KiB, Duration{0}});
    const double piece = 1.0 + 1e3 * 1024.0 / 100e6;
    CHECK(ms(predict_makespan(cfg, tiny)) == doctest::Approx(1024 * piece).epsilon(1e-6));

    // A late request starts when issued.
    std::vector<ReadAt> late{{0, 1'000'000, 50ms}};
    CHECK(ms(predict_makespan(cfg, late)) == doctest::Approx(61.0).epsilon(1e-6));
  }

  TEST_CASE("hump: many clients beat one, and overwhelm the stripes when tiny") {
    SimBackendConfig cfg = desk_config("", 1);
    const std::uint64_t file = 64 * MiB;
    const double c1 = throughput(cfg, file, 1), c16 = throughput(cfg, file, 16), c1024 = throughput(cfg, file, 1024);
    CHECK(c16 > c1);
    CHECK(c16 > c1024);
    CHECK(c16 >= 1.5 * c1);
    CHECK(c16 >= 1.5 * c1024);
  }

  TEST_CASE("simulated backend: content transparency") {
    auto path = aggio::testing::pattern_file(1 * MiB);
    SimBackendConfig cfg = desk_config(path, 0);
    cfg.stripe_width = 4096;
    cfg.per_request_overhead = Duration{0};
    cfg.stream_bandwidth = 1e13;
    auto sim = open_simulated(cfg);
    auto os = open_os_file(path);
    REQUIRE(sim.ok());
    REQUIRE(os.ok());
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
      std::uint64_t off = rng() % MiB;
      std::uint64_t len = rng() % (MiB - off + 1) / 8;
      auto a = (*sim)->read_at(off, len);
      auto b = (*os)->read_at(off, len);
      REQUIRE(a.ok());
      CHECK(*a == *b);
    }
  }

  TEST_CASE("simulated backend: timing follows the service model") {
    auto path = aggio::testing::pattern_file(4 * MiB);
    {
      auto sim = open_simulated(desk_config(path, 0));
      REQUIRE(sim.ok());
      CHECK(within(timed_read(**sim, 0, 1'000'000), 11.0, 0.25));
      CHECK(within(timed_read(**sim, 0, 2 * MiB), 11.49, 0.25));
    }
    {
      auto sim = open_simulated(desk_config(path, 1));
      REQUIRE(sim.ok());
      CHECK(within(timed_read(**sim, 0, 2 * MiB), 22.97, 0.25));
    }
    {
      auto sim = open_simulated(desk_config(path, 0));
      REQUIRE(sim.ok());
      std::vector<ReadAt> same{{0, 1'000'000, Duration{0}}, {0, 1'000'000, Duration{0}}};
      const double measured = ms(aggio::testing::run_schedule(**sim, same));
      CHECK(within(measured, 22.0, 0.25));
    }
  }

  TEST_CASE("simulated backend: randomized schedules track the oracle") {
    auto path = aggio::testing::pattern_file(8 * MiB);
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
      SimBackendConfig cfg = desk_config(path, static_cast<std::uint32_t>(rng() % 3));
      cfg.stripe_width = 256 * KiB;
      auto sim = open_simulated(cfg);
      REQUIRE(sim.ok());
      std::vector<ReadAt> schedule;
      const int n = 1 + static_cast<int>(rng() % 6);
      for (int i = 0; i < n; ++i) {
        std::uint64_t len = 64 * KiB + rng() % (768 * KiB);
        std::uint64_t off = rng() % (8 * MiB - len);
        schedule.push_back({off, len, std::chrono::milliseconds(3 * i + static_cast<int>(rng() % 3))});
      }
      bool ok = false;
      const double measured = ms(aggio::testing::run_schedule(**sim, schedule, &ok));
      const double predicted = ms(predict_makespan(cfg, schedule));
      CHECK(ok);
      CHECK_MESSAGE(within(measured, predicted, 0.25), "measured " << measured << " ms vs predicted " << predicted);
    }
  }
}
