#include "internal.hpp"

namespace aggio::ckio {

void Manager::register_file(FileHandle handle) { files_[handle.file_id] = std::move(handle); }

void Manager::drop_file(std::uint64_t file_id) { files_.erase(file_id); }

void Manager::session_started(SessionInfo info) {
  const std::uint64_t sid = info.handle.session_id;
  sessions_[sid] = SessionEntry{std::move(info), 0, false};
}

void Manager::begin_close(std::uint64_t session_id) {
  std::uint64_t outstanding = 0;
  auto it = sessions_.find(session_id);
  if (it != sessions_.end()) {
    // New reads are refused until the director either purges or reopens.
    it->second.closing = true;
    outstanding = it->second.outstanding;
  }
  shared_->runtime->send<Director>(shared_->director,
                                   [session_id, outstanding](Director& d) { d.close_poll(session_id, outstanding); });
}

void Manager::cancel_close(std::uint64_t session_id) {
  auto it = sessions_.find(session_id);
  if (it != sessions_.end()) it->second.closing = false;
}

void Manager::purge(std::uint64_t session_id) {
  sessions_.erase(session_id);
  shared_->runtime->send<Director>(shared_->director, [session_id](Director& d) { d.session_purged(session_id); });
}

void Manager::issue_read(const SessionHandle& session, std::uint64_t bytes, std::uint64_t offset,
                         std::span<std::byte> dest, rt::Callback<ReadResult> after_read) {
  ReadResult result;
  result.offset = offset;
  result.bytes = bytes;

  auto it = sessions_.find(session.session_id);
  if (it == sessions_.end() || it->second.closing) {
    result.status = Error(ErrorCode::closed, "session " + std::to_string(session.session_id) + " is not open");
    after_read(std::move(result));
    return;
  }
  SessionEntry& entry = it->second;
  const partition::SessionExtent& extent = entry.info.handle.extent;
  if (!partition::contains(extent, offset, bytes)) {
    result.status = Error(ErrorCode::out_of_range,
                          "read [" + std::to_string(offset) + ", +" + std::to_string(bytes) + ") outside session [" +
                              std::to_string(extent.file_offset) + ", " + std::to_string(extent.end()) + ")");
    after_read(std::move(result));
    return;
  }
  if (dest.size() < bytes) {
    result.status = Error(ErrorCode::invalid_argument, "destination buffer smaller than request");
    after_read(std::move(result));
    return;
  }
  if (bytes == 0) {
    result.data = dest.first(0);
    after_read(std::move(result));
    return;
  }

  rt::Runtime& runtime = *shared_->runtime;
  const rt::ExecutorId me = *rt::Runtime::this_executor();
  const ReadTag tag{me, next_sequence_++};
  ++entry.outstanding;

  ReadAssembler::Pending pending;
  pending.session_id = session.session_id;
  pending.offset = offset;
  pending.expected = bytes;
  pending.dest = dest.first(bytes);
  pending.after_read = std::move(after_read);
  pending.metrics = entry.info.metrics;
  pending.issued_at = Clock::now();
  runtime.local<ReadAssembler>(shared_->assemblers).expect(tag, std::move(pending));

  const rt::ObjectRef assembler = shared_->assemblers[me];
  const partition::ByteRange whole{offset, offset + bytes};
  auto dispatch = [&](rt::ObjectRef reader, partition::ByteRange range) {
    ReaderRequest req{tag, range, offset, assembler, {}};
    runtime.send<BufferReader>(reader, [req](BufferReader& r) mutable { r.request(req); });
  };
  if (shared_->options.routing == Routing::broadcast) {
    for (rt::ObjectRef reader : entry.info.readers.elements) dispatch(reader, whole);
  } else {
    for (const partition::FragmentPlan& plan : partition::owners(extent, offset, bytes))
      dispatch(entry.info.readers[plan.reader_index], plan.file_range);
  }
}

void Manager::read_finished(std::uint64_t session_id) {
  auto it = sessions_.find(session_id);
  if (it != sessions_.end() && it->second.outstanding > 0) --it->second.outstanding;
}

}  // namespace aggio::ckio
