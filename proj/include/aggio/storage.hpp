#pragma once

// Positional-read backends.
//
// The simulated backend models a striped parallel file system: the file is
// laid out round-robin in stripe_width blocks over `stripes` independent FIFO
// servers. A request is split at block boundaries; each piece of n bytes
// occupies its stripe for per_request_overhead + n / stream_bandwidth. One
// request keeps at most `client_window` pieces in flight (0 = all at once), so
// a lone client streaming a large range sees one stripe at a time while many
// clients spread over all stripes, and many tiny requests drown in overhead.
// Content always comes from a real backing file; only timing is modeled.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aggio/status.hpp"

namespace aggio::storage {

using Clock = std::chrono::steady_clock;
using Duration = Clock::duration;

inline constexpr std::uint64_t KiB = 1024;
inline constexpr std::uint64_t MiB = 1024 * KiB;

struct SimBackendConfig {
  std::uint32_t stripes = 4;
  std::uint64_t stripe_width = 1 * MiB;
  Duration per_request_overhead = std::chrono::milliseconds(1);
  double stream_bandwidth = 100e6;  // bytes per second, per stripe
  std::uint32_t client_window = 1;
  std::string backing;
};

Status validate(const SimBackendConfig& config);

struct ReadAt {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  Duration issue_time{0};
};

// One stripe-contiguous piece of a request.
struct SubRequest {
  std::uint32_t stripe = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

std::vector<SubRequest> split_by_stripe(const SimBackendConfig& config, std::uint64_t offset, std::uint64_t length);

// Time one piece of `bytes` holds its stripe.
Duration service_time(const SimBackendConfig& config, std::uint64_t bytes);

// Completion time of the last request under the FIFO-per-stripe model,
// by discrete-event simulation (no sleeping). Issue times are offsets from 0.
Duration predict_makespan(const SimBackendConfig& config, std::span<const ReadAt> requests);

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::uint64_t size() const = 0;
  virtual const std::string& path() const = 0;

  // Exactly the bytes [offset, offset + length). Blocking; call from I/O threads.
  virtual Result<std::vector<std::byte>> read_at(std::uint64_t offset, std::uint64_t length) = 0;
};

Result<std::shared_ptr<Backend>> open_os_file(const std::string& path);

// Stripe servers shared by every file opened through one simulated file system.
class StripeSet;

Result<std::shared_ptr<Backend>> open_simulated(const SimBackendConfig& config);
Result<std::shared_ptr<Backend>> open_simulated(const SimBackendConfig& config, std::shared_ptr<StripeSet> stripes);
std::shared_ptr<StripeSet> make_stripe_set(std::uint32_t stripes);

enum class BackendKind { os_file, simulated };

struct BackendSpec {
  BackendKind kind = BackendKind::os_file;
  SimBackendConfig sim;  // backing is replaced by the opened path
};

using BackendFactory = std::function<Result<std::shared_ptr<Backend>>(const std::string& path)>;

// Factory over a fixed spec. Simulated files opened through one factory share stripes.
BackendFactory make_factory(const BackendSpec& spec);

}  // namespace aggio::storage
