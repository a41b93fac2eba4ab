#include <doctest.h>

#include <random>
#include <vector>

#include "aggio/partition.hpp"
#include "partition_oracle.hpp"

using namespace aggio::partition;

using aggio::testing::brute_chunks;
using aggio::testing::brute_owners;

TEST_SUITE("partition") {
  TEST_CASE("chunk_bounds: examples") {
    SessionExtent e{0, 1000, 4};
    CHECK(chunk_bounds(e, 0) == ChunkSpec{0, 0, 250});
    CHECK(chunk_bounds(e, 1) == ChunkSpec{1, 250, 500});
    CHECK(chunk_bounds(e, 2) == ChunkSpec{2, 500, 750});
    CHECK(chunk_bounds(e, 3) == ChunkSpec{3, 750, 1000});

    SessionExtent odd{10, 10, 3};
    CHECK(chunk_bounds(odd, 0) == ChunkSpec{0, 10, 14});
    CHECK(chunk_bounds(odd, 1) == ChunkSpec{1, 14, 17});
    CHECK(chunk_bounds(odd, 2) == ChunkSpec{2, 17, 20});

    SessionExtent one{123, 4567, 1};
    CHECK(chunk_bounds(one, 0) == ChunkSpec{0, 123, 123 + 4567});
  }

  TEST_CASE("chunk_bounds matches the brute-force dealer") {
    for (SessionExtent e : {SessionExtent{0, 1000, 4}, SessionExtent{10, 10, 3}, SessionExtent{7, 0, 5},
                            SessionExtent{0, 3, 7}}) {
      auto chunks = brute_chunks(e);
      for (std::uint32_t i = 0; i < e.num_readers; ++i) CHECK(chunk_bounds(e, i).range() == chunks[i]);
    }
  }

  TEST_CASE("zero-length session yields empty chunks") {
    SessionExtent e{42, 0, 3};
    for (std::uint32_t i = 0; i < 3; ++i) CHECK(chunk_bounds(e, i).size() == 0);
    CHECK(owners(e, 42, 0).empty());
  }

  TEST_CASE("owners: examples") {
    SessionExtent e{0, 1000, 4};
    auto straddle = owners(e, 240, 30);
    REQUIRE(straddle.size() == 2);
    CHECK(straddle[0] == FragmentPlan{0, {240, 250}, 0});
    CHECK(straddle[1] == FragmentPlan{1, {250, 270}, 10});
    CHECK(straddle == brute_owners(e, 240, 30));

    auto exact = owners(e, 250, 250);
    REQUIRE(exact.size() == 1);
    CHECK(exact[0] == FragmentPlan{1, {250, 500}, 0});

    CHECK(owners(e, 500, 0).empty());
    CHECK(owners(e, 1000, 0).empty());
  }

  TEST_CASE("owners rejects requests outside the session") {
    SessionExtent e{100, 1000, 4};
    CHECK_THROWS_AS(owners(e, 990 + 100, 20), RangeError);
    CHECK_THROWS_AS(owners(e, 99, 1), RangeError);
    CHECK_THROWS_AS(owners(e, 100, ~0ull), RangeError);
  }

  TEST_CASE("randomized partition and tiling properties") {
    std::mt19937_64 rng(20240611);
    for (int trial = 0; trial < 2000; ++trial) {
      SessionExtent e{rng() % 100000, rng() % 5000, static_cast<std::uint32_t>(1 + rng() % 40)};
      std::uint64_t sum = 0, lo = ~0ull, hi = 0, at = e.file_offset;
      for (std::uint32_t i = 0; i < e.num_readers; ++i) {
        ChunkSpec c = chunk_bounds(e, i);
        REQUIRE(c.start == at);  // contiguous, disjoint, in order
        at = c.end;
        sum += c.size();
        lo = std::min(lo, c.size());
        hi = std::max(hi, c.size());
        if (c.size() > 0) {
          auto self = owners(e, c.start, c.size());
          REQUIRE(self.size() == 1);
          CHECK(self[0].reader_index == i);
        }
      }
      CHECK(at == e.end());
      CHECK(sum == e.length);
      CHECK(hi - lo <= 1);

      const std::uint64_t off = e.file_offset + (e.length ? rng() % e.length : 0);
      const std::uint64_t len = (e.end() - off) ? rng() % (e.end() - off + 1) : 0;
      auto plans = owners(e, off, len);
      CHECK(plans == brute_owners(e, off, len));
    }
  }
}
