#pragma once

// Self-verifying test files: the byte at offset x is x mod 251. Any slice can
// be checked without a reference copy, and 251 being prime keeps the pattern
// out of phase with power-of-two chunk and stripe sizes.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "aggio/status.hpp"

namespace aggio::pattern {

inline constexpr std::uint64_t kModulus = 251;

inline std::byte byte_at(std::uint64_t offset) { return static_cast<std::byte>(offset % kModulus); }

void fill(std::span<std::byte> dest, std::uint64_t file_offset);

// Offset (relative to the slice) of the first byte that breaks the rule.
std::optional<std::uint64_t> first_mismatch(std::span<const std::byte> data, std::uint64_t file_offset);

inline bool verify(std::span<const std::byte> data, std::uint64_t file_offset) {
  return !first_mismatch(data, file_offset).has_value();
}

// Writes exactly `size` bytes following the rule.
Status generate(const std::string& path, std::uint64_t size);

}  // namespace aggio::pattern
