#include "aggio/storage.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <queue>
#include <thread>

namespace aggio::storage {

Status validate(const SimBackendConfig& config) {
  if (config.stripes == 0) return Error(ErrorCode::invalid_argument, "sim: stripes must be >= 1");
  if (config.stripe_width == 0) return Error(ErrorCode::invalid_argument, "sim: stripe width must be > 0");
  if (config.per_request_overhead < Duration::zero())
    return Error(ErrorCode::invalid_argument, "sim: per-request overhead must be >= 0");
  if (!(config.stream_bandwidth > 0.0)) return Error(ErrorCode::invalid_argument, "sim: bandwidth must be > 0");
  return Status::Ok();
}

std::vector<SubRequest> split_by_stripe(const SimBackendConfig& config, std::uint64_t offset, std::uint64_t length) {
  std::vector<SubRequest> out;
  const std::uint64_t end = offset + length;
  for (std::uint64_t x = offset; x < end;) {
    const std::uint64_t block = x / config.stripe_width;
    const std::uint64_t block_end = (block + 1) * config.stripe_width;
    const std::uint64_t piece_end = std::min(end, block_end);
    out.push_back({static_cast<std::uint32_t>(block % config.stripes), x, piece_end - x});
    x = piece_end;
  }
  return out;
}

Duration service_time(const SimBackendConfig& config, std::uint64_t bytes) {
  return config.per_request_overhead +
         std::chrono::duration_cast<Duration>(
             std::chrono::duration<double>(static_cast<double>(bytes) / config.stream_bandwidth));
}

Duration predict_makespan(const SimBackendConfig& config, std::span<const ReadAt> requests) {
  struct Arrival {
    Duration time;
    std::uint64_t seq;
    std::size_t request;
  };
  struct Later {
    bool operator()(const Arrival& a, const Arrival& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  std::vector<std::vector<SubRequest>> pieces(requests.size());
  std::vector<std::size_t> consumed(requests.size(), 0);
  std::vector<std::size_t> scheduled(requests.size(), 0);
  std::priority_queue<Arrival, std::vector<Arrival>, Later> events;
  std::uint64_t seq = 0;

  // Requests enter in issue order; ties keep list order.
  std::vector<std::size_t> order(requests.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return requests[a].issue_time < requests[b].issue_time; });
  for (std::size_t r : order) {
    pieces[r] = split_by_stripe(config, requests[r].offset, requests[r].length);
    std::size_t window = config.client_window == 0 ? pieces[r].size() : config.client_window;
    scheduled[r] = std::min(window, pieces[r].size());
    for (std::size_t k = 0; k < scheduled[r]; ++k) events.push({requests[r].issue_time, seq++, r});
  }

  std::vector<Duration> stripe_free(config.stripes, Duration::zero());
  Duration makespan = Duration::zero();
  for (const ReadAt& r : requests) makespan = std::max(makespan, r.issue_time);

  while (!events.empty()) {
    Arrival a = events.top();
    events.pop();
    const SubRequest& piece = pieces[a.request][consumed[a.request]++];
    Duration start = std::max(a.time, stripe_free[piece.stripe]);
    Duration end = start + service_time(config, piece.length);
    stripe_free[piece.stripe] = end;
    makespan = std::max(makespan, end);
    // The completed piece frees a window slot for the request's next piece.
    if (scheduled[a.request] < pieces[a.request].size()) {
      ++scheduled[a.request];
      events.push({end, seq++, a.request});
    }
  }
  return makespan;
}

namespace {

class OsFile final : public Backend {
 public:
  OsFile(int fd, std::string path, std::uint64_t size) : fd_(fd), path_(std::move(path)), size_(size) {}
  ~OsFile() override { ::close(fd_); }

  std::uint64_t size() const override { return size_; }
  const std::string& path() const override { return path_; }

  Result<std::vector<std::byte>> read_at(std::uint64_t offset, std::uint64_t length) override {
    if (offset > size_ || length > size_ - offset)
      return Error(ErrorCode::out_of_range, "read_at [" + std::to_string(offset) + ", +" + std::to_string(length) +
                                                ") beyond end of " + path_);
    std::vector<std::byte> out(length);
    Status st = read_into(offset, out);
    if (!st) return st;
    return out;
  }

  Status read_into(std::uint64_t offset, std::span<std::byte> dest) const {
    std::size_t done = 0;
    while (done < dest.size()) {
      ssize_t n = ::pread(fd_, dest.data() + done, dest.size() - done, static_cast<off_t>(offset + done));
      if (n < 0) {
        if (errno == EINTR) continue;
        return Error(ErrorCode::io_error, "pread " + path_ + ": " + std::strerror(errno));
      }
      if (n == 0) return Error(ErrorCode::io_error, "unexpected end of file in " + path_);
      done += static_cast<std::size_t>(n);
    }
    return Status::Ok();
  }

 private:
  int fd_;
  std::string path_;
  std::uint64_t size_;
};

Result<std::shared_ptr<OsFile>> open_os(const std::string& path) {
  int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) return Error(ErrorCode::not_found, "open " + path + ": " + std::strerror(errno));
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    int err = errno;
    ::close(fd);
    return Error(ErrorCode::io_error, "stat " + path + ": " + std::strerror(err));
  }
  if (!S_ISREG(st.st_mode)) {
    ::close(fd);
    return Error(ErrorCode::invalid_argument, path + " is not a regular file");
  }
  return std::make_shared<OsFile>(fd, path, static_cast<std::uint64_t>(st.st_size));
}

}  // namespace

class StripeSet {
 public:
  explicit StripeSet(std::uint32_t n) : stripes_(n) {}

  std::uint32_t size() const { return static_cast<std::uint32_t>(stripes_.size()); }

  // FIFO by arrival: a piece arriving now starts once everything reserved
  // before it on the same stripe has finished.
  Clock::time_point reserve(std::uint32_t stripe, Clock::time_point arrival, Duration service) {
    Stripe& s = stripes_[stripe];
    std::lock_guard lock(s.mutex);
    Clock::time_point start = std::max(arrival, s.busy_until);
    s.busy_until = start + service;
    return s.busy_until;
  }

 private:
  struct Stripe {
    std::mutex mutex;
    Clock::time_point busy_until{};
  };
  std::vector<Stripe> stripes_;
};

std::shared_ptr<StripeSet> make_stripe_set(std::uint32_t stripes) { return std::make_shared<StripeSet>(stripes); }

namespace {

// Stripe order follows arrival order, so window waits must not oversleep.
void wait_until_precise(Clock::time_point t) {
  std::this_thread::sleep_until(t - std::chrono::microseconds(300));
  while (Clock::now() < t) std::this_thread::yield();
}

class SimulatedFile final : public Backend {
 public:
  SimulatedFile(SimBackendConfig config, std::shared_ptr<OsFile> file, std::shared_ptr<StripeSet> stripes)
      : config_(std::move(config)), file_(std::move(file)), stripes_(std::move(stripes)) {}

  std::uint64_t size() const override { return file_->size(); }
  const std::string& path() const override { return file_->path(); }

  Result<std::vector<std::byte>> read_at(std::uint64_t offset, std::uint64_t length) override {
    if (offset > size() || length > size() - offset)
      return Error(ErrorCode::out_of_range, "read_at [" + std::to_string(offset) + ", +" + std::to_string(length) +
                                                ") beyond end of " + path());
    const Clock::time_point issued = Clock::now();
    std::vector<SubRequest> pieces = split_by_stripe(config_, offset, length);
    const std::size_t window = config_.client_window == 0 ? pieces.size() : config_.client_window;

    // Min-heap of completion times of pieces currently in flight. A piece
    // beyond the window arrives when the earliest in-flight piece finishes.
    std::priority_queue<Clock::time_point, std::vector<Clock::time_point>, std::greater<>> inflight;
    std::vector<std::byte> out;  // allocated once the first pieces hold their stripes
    Clock::time_point last = issued;
    std::size_t copied = 0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      Clock::time_point arrival = issued;
      if (inflight.size() >= window) {
        arrival = inflight.top();
        wait_until_precise(arrival);
        inflight.pop();
      }
      Clock::time_point done =
          stripes_->reserve(pieces[i].stripe % stripes_->size(), arrival, service_time(config_, pieces[i].length));
      inflight.push(done);
      last = std::max(last, done);
      // Copy content for reserved pieces while their service time elapses.
      if (inflight.size() >= window || i + 1 == pieces.size()) {
        out.resize(length);
        for (; copied <= i; ++copied) {
          const SubRequest& p = pieces[copied];
          Status st = file_->read_into(p.offset, std::span(out).subspan(p.offset - offset, p.length));
          if (!st) return st;
        }
      }
    }
    std::this_thread::sleep_until(last);
    return out;
  }

 private:
  SimBackendConfig config_;
  std::shared_ptr<OsFile> file_;
  std::shared_ptr<StripeSet> stripes_;
};

}  // namespace

Result<std::shared_ptr<Backend>> open_os_file(const std::string& path) {
  auto file = open_os(path);
  if (!file) return file.status();
  return std::shared_ptr<Backend>(std::move(file).value());
}

Result<std::shared_ptr<Backend>> open_simulated(const SimBackendConfig& config, std::shared_ptr<StripeSet> stripes) {
  Status st = validate(config);
  if (!st) return st;
  if (!stripes || stripes->size() != config.stripes)
    return Error(ErrorCode::invalid_argument, "sim: stripe set does not match config");
  auto file = open_os(config.backing);
  if (!file) return file.status();
  return std::shared_ptr<Backend>(std::make_shared<SimulatedFile>(config, std::move(file).value(), std::move(stripes)));
}

Result<std::shared_ptr<Backend>> open_simulated(const SimBackendConfig& config) {
  Status st = validate(config);
  if (!st) return st;
  return open_simulated(config, make_stripe_set(config.stripes));
}

BackendFactory make_factory(const BackendSpec& spec) {
  if (spec.kind == BackendKind::os_file)
    return [](const std::string& path) { return open_os_file(path); };
  auto stripes = make_stripe_set(std::max<std::uint32_t>(spec.sim.stripes, 1));
  SimBackendConfig base = spec.sim;
  return [base, stripes](const std::string& path) {
    SimBackendConfig cfg = base;
    cfg.backing = path;
    return open_simulated(cfg, stripes);
  };
}

}  // namespace aggio::storage
