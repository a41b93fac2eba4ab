#include <thread>

#include "internal.hpp"

namespace aggio::ckio {

void BufferReader::start() {
  if (status_ != ChunkStatus::pending) return;
  if (chunk_.size() == 0) {
    status_ = ChunkStatus::ready;
    data_ = std::make_shared<const std::vector<std::byte>>();
    return;
  }
  status_ = ChunkStatus::reading;

  rt::Runtime& runtime = *shared_->runtime;
  runtime.io_started();
  // The thread never touches `this`: the reader may be destroyed before the
  // read lands, in which case the completion invocation is simply dropped.
  std::thread([&runtime, backend = backend_, chunk = chunk_, me = self()] {
    const auto t0 = Clock::now();
    auto result = backend->read_at(chunk.start, chunk.size());
    const rt::Duration elapsed = Clock::now() - t0;
    runtime.send<BufferReader>(
        me, [r = std::move(result), elapsed](BufferReader& reader) mutable { reader.io_complete(std::move(r), elapsed); },
        0);
    runtime.io_finished();
  }).detach();
}

void BufferReader::request(ReaderRequest req) {
  req.arrived_at = Clock::now();
  if (status_ == ChunkStatus::ready || status_ == ChunkStatus::failed) {
    serve(req);
    return;
  }
  queued_.push_back(req);
}

void BufferReader::io_complete(Result<std::vector<std::byte>> result, rt::Duration elapsed) {
  metrics_->io_ns.fetch_add(to_ns(elapsed));
  metrics_->backend_reads.fetch_add(1);
  if (result.ok()) {
    const std::uint64_t bytes = result->size();
    std::atomic<std::uint64_t>* live = &shared_->live_chunk_bytes;
    live->fetch_add(bytes);
    auto* buffer = new std::vector<std::byte>(std::move(result).value());
    data_ = ChunkData(buffer, [live, bytes](const std::vector<std::byte>* p) {
      live->fetch_sub(bytes);
      delete p;
    });
    status_ = ChunkStatus::ready;
  } else {
    error_ = result.status();
    status_ = ChunkStatus::failed;
  }
  while (!queued_.empty()) {
    ReaderRequest req = std::move(queued_.front());
    queued_.pop_front();
    serve(req);
  }
}

void BufferReader::serve(const ReaderRequest& req) {
  const partition::ByteRange piece = partition::intersect(chunk_.range(), req.file_range);
  if (piece.empty()) return;

  Fragment frag;
  frag.tag = req.tag;
  frag.dest_offset = piece.start - req.request_offset;
  frag.length = piece.size();
  frag.sent_at = Clock::now();
  frag.io_wait = frag.sent_at - req.arrived_at;
  if (status_ == ChunkStatus::ready) {
    frag.chunk = data_;
    frag.chunk_offset = piece.start - chunk_.start;
    metrics_->bytes_served.fetch_add(piece.size());
  } else {
    frag.status = error_;
  }
  metrics_->fragments.fetch_add(1);
  const std::uint64_t payload = frag.status.ok() ? frag.length : 0;
  shared_->runtime->send<ReadAssembler>(
      req.assembler, [f = std::move(frag)](ReadAssembler& a) mutable { a.on_fragment(std::move(f)); }, payload);
}

}  // namespace aggio::ckio
