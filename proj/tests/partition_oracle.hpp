#pragma once

#include <vector>

#include "aggio/partition.hpp"

namespace aggio::testing {

using partition::ByteRange;
using partition::FragmentPlan;
using partition::SessionExtent;

// Oracle: deal the extent's bytes out by value-balanced blocks, one reader at a
// time, giving the leftover bytes to the lowest readers; no closed-form offsets.
inline std::vector<ByteRange> brute_chunks(const SessionExtent& e) {
  std::vector<std::uint64_t> sizes(e.num_readers, 0);
  for (std::uint64_t b = 0; b < e.length; ++b) sizes[b % e.num_readers]++;  // round-robin count only
  std::vector<ByteRange> out;
  std::uint64_t at = e.file_offset;
  for (std::uint64_t s : sizes) {
    out.push_back({at, at + s});
    at += s;
  }
  return out;
}

// Oracle: scan every byte of the request, find its owner by linear search,
// and coalesce consecutive bytes with the same owner.
inline std::vector<FragmentPlan> brute_owners(const SessionExtent& e, std::uint64_t off, std::uint64_t len) {
  auto chunks = brute_chunks(e);
  std::vector<FragmentPlan> out;
  for (std::uint64_t x = off; x < off + len; ++x) {
    std::uint32_t owner = 0;
    while (!(chunks[owner].start <= x && x < chunks[owner].end)) ++owner;
    if (!out.empty() && out.back().reader_index == owner) {
      out.back().file_range.end = x + 1;
    } else {
      out.push_back({owner, {x, x + 1}, x - off});
    }
  }
  return out;
}


}  // namespace aggio::testing
