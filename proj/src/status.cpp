#include "aggio/status.hpp"

namespace aggio {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::out_of_range: return "out of range";
    case ErrorCode::not_found: return "not found";
    case ErrorCode::io_error: return "I/O error";
    case ErrorCode::closed: return "closed";
    case ErrorCode::busy: return "busy";
    case ErrorCode::rejected: return "rejected";
    case ErrorCode::data_mismatch: return "data_mismatch";
  }
  return "unknown";
}

std::string Status::to_string() const {
  if (ok()) return "ok";
  return std::string(aggio::to_string(code_)) + ": " + message_;
}

}  // namespace aggio
