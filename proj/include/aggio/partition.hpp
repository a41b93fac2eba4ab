#pragma once

// Balanced block partition of a read session into buffer-reader chunks, and
// the mapping of a client request onto the readers that own its bytes.

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace aggio::partition {

struct ByteRange {
  std::uint64_t start = 0;
  std::uint64_t end = 0;  // exclusive

  std::uint64_t size() const { return end - start; }
  bool empty() const { return end <= start; }
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

struct SessionExtent {
  std::uint64_t file_offset = 0;
  std::uint64_t length = 0;
  std::uint32_t num_readers = 1;

  std::uint64_t end() const { return file_offset + length; }
  friend bool operator==(const SessionExtent&, const SessionExtent&) = default;
};

struct ChunkSpec {
  std::uint32_t reader_index = 0;
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const { return end - start; }
  ByteRange range() const { return {start, end}; }
  friend bool operator==(const ChunkSpec&, const ChunkSpec&) = default;
};

struct FragmentPlan {
  std::uint32_t reader_index = 0;
  ByteRange file_range;
  std::uint64_t dest_offset = 0;

  friend bool operator==(const FragmentPlan&, const FragmentPlan&) = default;
};

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Chunk i gets base = length / R bytes, plus one of the remainder bytes when
// i < length % R. Precondition: i < num_readers, num_readers >= 1.
ChunkSpec chunk_bounds(const SessionExtent& extent, std::uint32_t i);

// Index of the reader whose chunk contains file offset x (x inside the extent).
std::uint32_t reader_of(const SessionExtent& extent, std::uint64_t x);

// Fragments tiling [req_offset, req_offset + req_len), in file order.
// Throws RangeError when the request leaves the session extent.
std::vector<FragmentPlan> owners(const SessionExtent& extent, std::uint64_t req_offset, std::uint64_t req_len);

bool contains(const SessionExtent& extent, std::uint64_t offset, std::uint64_t length);

ByteRange intersect(const ByteRange& a, const ByteRange& b);

}  // namespace aggio::partition
