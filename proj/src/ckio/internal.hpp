#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <map>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "aggio/ckio.hpp"

namespace aggio::ckio {

using rt::Clock;

class Director;
class Manager;
class ReadAssembler;
class BufferReader;

struct MetricsCounters {
  std::atomic<std::int64_t> io_ns{0};
  std::atomic<std::int64_t> permutation_ns{0};
  std::atomic<std::int64_t> overhead_ns{0};
  std::atomic<std::uint64_t> bytes_served{0};
  std::atomic<std::uint64_t> fragments{0};
  std::atomic<std::uint64_t> backend_reads{0};
  std::atomic<std::uint64_t> requests_completed{0};

  SessionMetrics snapshot() const;
};

inline std::int64_t to_ns(rt::Duration d) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(d).count();
}

struct Input::Shared {
  rt::Runtime* runtime = nullptr;
  InputOptions options;
  rt::ObjectRef director;
  rt::Group<Manager> managers;
  rt::Group<ReadAssembler> assemblers;

  std::atomic<std::uint64_t> live_chunk_bytes{0};

  mutable std::mutex metrics_mutex;
  std::unordered_map<std::uint64_t, std::shared_ptr<MetricsCounters>> metrics;
};

using SharedPtr = std::shared_ptr<Input::Shared>;
using ChunkData = std::shared_ptr<const std::vector<std::byte>>;

struct SessionInfo {
  SessionHandle handle;
  rt::Array<BufferReader> readers;
  std::shared_ptr<MetricsCounters> metrics;
};

// One piece of a client request, moved from a reader to an assembler. The
// chunk buffer is shared rather than copied; the assembler copies exactly once
// into the destination.
struct Fragment {
  ReadTag tag;
  std::uint64_t dest_offset = 0;
  std::uint64_t length = 0;
  ChunkData chunk;
  std::uint64_t chunk_offset = 0;
  Status status;
  Clock::time_point sent_at{};
  rt::Duration io_wait{0};
};

struct ReaderRequest {
  ReadTag tag;
  partition::ByteRange file_range;
  std::uint64_t request_offset = 0;
  rt::ObjectRef assembler;
  Clock::time_point arrived_at{};
};

class Director final : public rt::Object {
 public:
  explicit Director(SharedPtr shared) : shared_(std::move(shared)) {}

  void open(std::string path, FileOptions options, rt::Callback<Result<FileHandle>> opened);
  void file_registered(std::uint64_t file_id);
  void start_session(std::uint64_t file_id, std::uint64_t bytes, std::uint64_t offset,
                     rt::Callback<Result<SessionHandle>> ready);
  void session_ack(std::uint64_t session_id);
  void close_session(std::uint64_t session_id, rt::Callback<Status> after_end);
  void close_poll(std::uint64_t session_id, std::uint64_t outstanding);
  void session_purged(std::uint64_t session_id);
  void close_file(std::uint64_t file_id, rt::Callback<Status> closed);
  void file_dropped(std::uint64_t file_id);

 private:
  enum class FileState { opening, open, closing };
  enum class SessionState { starting, open, polling, purging };

  struct FileRecord {
    FileHandle handle;
    std::shared_ptr<storage::Backend> backend;
    FileState state = FileState::opening;
    std::uint32_t acks = 0;
    std::size_t live_sessions = 0;
    rt::Callback<Result<FileHandle>> opened;
    rt::Callback<Status> closed;
  };

  struct SessionRecord {
    SessionInfo info;
    SessionState state = SessionState::starting;
    std::uint32_t acks = 0;
    std::uint64_t outstanding = 0;
    rt::Callback<Result<SessionHandle>> ready;
    rt::Callback<Status> after_end;
  };

  void broadcast(std::function<void(Manager&)> f);

  SharedPtr shared_;
  std::uint64_t next_file_id_ = 1;
  std::uint64_t next_session_id_ = 1;
  std::map<std::uint64_t, FileRecord> files_;
  std::map<std::uint64_t, SessionRecord> sessions_;
};

class Manager final : public rt::Object {
 public:
  explicit Manager(SharedPtr shared) : shared_(std::move(shared)) {}

  void register_file(FileHandle handle);
  void drop_file(std::uint64_t file_id);
  void session_started(SessionInfo info);
  void begin_close(std::uint64_t session_id);
  void cancel_close(std::uint64_t session_id);
  void purge(std::uint64_t session_id);

  // Synchronous, from a task on this executor.
  void issue_read(const SessionHandle& session, std::uint64_t bytes, std::uint64_t offset, std::span<std::byte> dest,
                  rt::Callback<ReadResult> after_read);
  void read_finished(std::uint64_t session_id);

 private:
  struct SessionEntry {
    SessionInfo info;
    std::uint64_t outstanding = 0;
    bool closing = false;
  };

  SharedPtr shared_;
  std::uint64_t next_sequence_ = 0;
  std::map<std::uint64_t, FileHandle> files_;
  std::unordered_map<std::uint64_t, SessionEntry> sessions_;
};

class ReadAssembler final : public rt::Object {
 public:
  explicit ReadAssembler(SharedPtr shared) : shared_(std::move(shared)) {}

  struct Pending {
    std::uint64_t session_id = 0;
    std::uint64_t offset = 0;
    std::uint64_t expected = 0;
    std::uint64_t received = 0;
    std::span<std::byte> dest;
    rt::Callback<ReadResult> after_read;
    std::shared_ptr<MetricsCounters> metrics;
    Clock::time_point issued_at{};
    rt::Duration max_io_wait{0};
    rt::Duration max_transfer{0};
    Status status;
  };

  // Synchronous, from the local manager.
  void expect(ReadTag tag, Pending pending);
  void on_fragment(Fragment fragment);

  std::size_t pending_count() const { return pending_.size(); }

 private:
  SharedPtr shared_;
  std::unordered_map<std::uint64_t, Pending> pending_;  // keyed by tag sequence
};

class BufferReader final : public rt::Object {
 public:
  enum class ChunkStatus { pending, reading, ready, failed };

  BufferReader(SharedPtr shared, std::uint64_t session_id, partition::ChunkSpec chunk,
               std::shared_ptr<storage::Backend> backend, std::shared_ptr<MetricsCounters> metrics)
      : shared_(std::move(shared)),
        session_id_(session_id),
        chunk_(chunk),
        backend_(std::move(backend)),
        metrics_(std::move(metrics)) {}

  void start();
  void request(ReaderRequest req);
  void io_complete(Result<std::vector<std::byte>> result, rt::Duration elapsed);

 private:
  void serve(const ReaderRequest& req);

  SharedPtr shared_;
  std::uint64_t session_id_;
  partition::ChunkSpec chunk_;
  std::shared_ptr<storage::Backend> backend_;
  std::shared_ptr<MetricsCounters> metrics_;
  ChunkStatus status_ = ChunkStatus::pending;
  ChunkData data_;
  Status error_;
  std::deque<ReaderRequest> queued_;
};

}  // namespace aggio::ckio
