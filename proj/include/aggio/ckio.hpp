#pragma once

// Two-phase parallel file input on top of the message-driven runtime.
//
// A read session declares a file window. At session start a layer of buffer
// readers (one array element per disjoint chunk, placed round-robin over the
// executors) begins reading its chunk immediately on a dedicated I/O thread.
// Clients then issue reads of arbitrary sub-ranges: the client's local manager
// tags the request, the local assembler registers the destination buffer, and
// each owning reader answers with a fragment once its chunk is in memory.
// Every completion is delivered through a runtime callback, addressed by
// ObjectRef so that migrated clients still receive it.
//
//   open -> start_read_session -> read* -> close_read_session -> close

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "aggio/partition.hpp"
#include "aggio/runtime.hpp"
#include "aggio/status.hpp"
#include "aggio/storage.hpp"

namespace aggio::ckio {

struct FileOptions {
  std::uint32_t num_readers = 1;
};

struct FileHandle {
  std::uint64_t file_id = 0;
  std::string path;
  std::uint64_t size = 0;
  FileOptions options;
};

struct SessionHandle {
  std::uint64_t session_id = 0;
  std::uint64_t file_id = 0;
  partition::SessionExtent extent;
};

struct ReadTag {
  rt::ExecutorId executor;
  std::uint64_t sequence = 0;

  friend auto operator<=>(const ReadTag&, const ReadTag&) = default;
};

struct ReadResult {
  Status status;
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
  std::span<std::byte> data;  // the caller's destination buffer, filled
};

struct SessionMetrics {
  double io_time = 0.0;           // seconds, summed over chunk reads
  double permutation_time = 0.0;  // seconds, summed fragment send -> assembled
  double overhead_time = 0.0;     // seconds, request wall time not spent waiting on I/O or transfer
  std::uint64_t bytes_served = 0;
  std::uint64_t fragments = 0;
  std::uint64_t backend_reads = 0;
  std::uint64_t requests_completed = 0;
};

enum class Routing {
  direct,     // requests go only to the readers owning the bytes
  broadcast,  // every reader sees every request and answers with its overlap
};

struct InputOptions {
  storage::BackendFactory backends = storage::make_factory({});
  Routing routing = Routing::direct;
};

class Input {
 public:
  // Creates the director and the manager/assembler groups on `runtime`.
  explicit Input(rt::Runtime& runtime, InputOptions options = {});
  ~Input();

  Input(const Input&) = delete;
  Input& operator=(const Input&) = delete;

  // `opened` fires after every manager knows the file.
  void open(std::string path, rt::Callback<Result<FileHandle>> opened, FileOptions options = {});

  // `ready` fires once every reader has started its chunk read (not finished it).
  void start_read_session(const FileHandle& file, std::uint64_t bytes, std::uint64_t offset,
                          rt::Callback<Result<SessionHandle>> ready);

  // `dest` must stay alive and untouched until `after_read` runs. Meant to be
  // called from a client's task; elsewhere it is relayed through executor 0.
  void read(const SessionHandle& session, std::uint64_t bytes, std::uint64_t offset, std::span<std::byte> dest,
            rt::Callback<ReadResult> after_read);

  // Rejected with ErrorCode::busy while reads of the session are outstanding.
  void close_read_session(const SessionHandle& session, rt::Callback<Status> after_end);

  // Rejected with ErrorCode::busy while sessions of the file remain open.
  void close(const FileHandle& file, rt::Callback<Status> closed);

  SessionMetrics metrics_snapshot(const SessionHandle& session) const;

  // Bytes held by live chunk buffers across all sessions.
  std::uint64_t live_chunk_bytes() const;

  struct Shared;

 private:
  rt::Runtime& runtime_;
  std::shared_ptr<Shared> shared_;
};

}  // namespace aggio::ckio
