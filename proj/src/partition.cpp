#include "aggio/partition.hpp"

#include <algorithm>
#include <string>

namespace aggio::partition {

ChunkSpec chunk_bounds(const SessionExtent& extent, std::uint32_t i) {
  const std::uint64_t readers = extent.num_readers;
  const std::uint64_t base = extent.length / readers;
  const std::uint64_t rem = extent.length % readers;
  const std::uint64_t start = extent.file_offset + i * base + std::min<std::uint64_t>(i, rem);
  const std::uint64_t size = base + (i < rem ? 1 : 0);
  return {i, start, start + size};
}

std::uint32_t reader_of(const SessionExtent& extent, std::uint64_t x) {
  const std::uint64_t readers = extent.num_readers;
  const std::uint64_t base = extent.length / readers;
  const std::uint64_t rem = extent.length % readers;
  const std::uint64_t rel = x - extent.file_offset;
  // The first `rem` chunks are base+1 wide.
  const std::uint64_t wide = rem * (base + 1);
  if (rel < wide) return static_cast<std::uint32_t>(rel / (base + 1));
  return static_cast<std::uint32_t>(rem + (rel - wide) / base);
}

bool contains(const SessionExtent& extent, std::uint64_t offset, std::uint64_t length) {
  if (offset < extent.file_offset) return false;
  if (offset > extent.end()) return false;
  return length <= extent.end() - offset;
}

ByteRange intersect(const ByteRange& a, const ByteRange& b) {
  std::uint64_t start = std::max(a.start, b.start);
  std::uint64_t end = std::min(a.end, b.end);
  if (end < start) end = start;
  return {start, end};
}

std::vector<FragmentPlan> owners(const SessionExtent& extent, std::uint64_t req_offset, std::uint64_t req_len) {
  if (!contains(extent, req_offset, req_len))
    throw RangeError("request [" + std::to_string(req_offset) + ", +" + std::to_string(req_len) +
                     ") outside session [" + std::to_string(extent.file_offset) + ", " +
                     std::to_string(extent.end()) + ")");
  std::vector<FragmentPlan> plans;
  if (req_len == 0) return plans;
  const std::uint64_t req_end = req_offset + req_len;
  std::uint32_t first = reader_of(extent, req_offset);
  std::uint32_t last = reader_of(extent, req_end - 1);
  plans.reserve(last - first + 1);
  for (std::uint32_t r = first; r <= last; ++r) {
    ByteRange piece = intersect(chunk_bounds(extent, r).range(), {req_offset, req_end});
    if (piece.empty()) continue;
    plans.push_back({r, piece, piece.start - req_offset});
  }
  return plans;
}

}  // namespace aggio::partition
