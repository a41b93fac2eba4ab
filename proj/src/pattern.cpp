#include "aggio/pattern.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <vector>

namespace aggio::pattern {

void fill(std::span<std::byte> dest, std::uint64_t file_offset) {
  std::uint64_t v = file_offset % kModulus;
  for (std::byte& b : dest) {
    b = static_cast<std::byte>(v);
    if (++v == kModulus) v = 0;
  }
}

std::optional<std::uint64_t> first_mismatch(std::span<const std::byte> data, std::uint64_t file_offset) {
  std::uint64_t v = file_offset % kModulus;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] != static_cast<std::byte>(v)) return i;
    if (++v == kModulus) v = 0;
  }
  return std::nullopt;
}

Status generate(const std::string& path, std::uint64_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return Error(ErrorCode::io_error, "cannot create " + path + ": " + std::strerror(errno));
  // 251 * 4096 bytes: a whole number of pattern periods, so every block is identical.
  std::vector<std::byte> block(kModulus * 4096);
  fill(block, 0);
  for (std::uint64_t written = 0; written < size;) {
    std::uint64_t n = std::min<std::uint64_t>(block.size(), size - written);
    out.write(reinterpret_cast<const char*>(block.data()), static_cast<std::streamsize>(n));
    if (!out) return Error(ErrorCode::io_error, "write to " + path + " failed");
    written += n;
  }
  out.close();
  if (!out) return Error(ErrorCode::io_error, "closing " + path + " failed");
  return Status::Ok();
}

}  // namespace aggio::pattern
