#include "internal.hpp"

namespace aggio::ckio {

void Director::broadcast(std::function<void(Manager&)> f) {
  shared_->runtime->broadcast(shared_->managers, f);
}

void Director::open(std::string path, FileOptions options, rt::Callback<Result<FileHandle>> opened) {
  if (options.num_readers == 0) {
    opened(Error(ErrorCode::invalid_argument, "num_readers must be >= 1"));
    return;
  }
  auto backend = shared_->options.backends(path);
  if (!backend) {
    opened(backend.status());
    return;
  }
  const std::uint64_t id = next_file_id_++;
  FileRecord& rec = files_[id];
  rec.handle = FileHandle{id, path, (*backend)->size(), options};
  rec.backend = std::move(backend).value();
  rec.opened = std::move(opened);
  FileHandle handle = rec.handle;
  rt::ObjectRef me = self();
  broadcast([handle, me](Manager& m) {
    m.register_file(handle);
    rt::Runtime::current().send<Director>(me, [id = handle.file_id](Director& d) { d.file_registered(id); });
  });
}

void Director::file_registered(std::uint64_t file_id) {
  auto it = files_.find(file_id);
  if (it == files_.end()) return;
  FileRecord& rec = it->second;
  if (++rec.acks == shared_->runtime->num_executors()) {
    rec.state = FileState::open;
    rec.opened(rec.handle);
    rec.opened = {};
  }
}

void Director::start_session(std::uint64_t file_id, std::uint64_t bytes, std::uint64_t offset,
                             rt::Callback<Result<SessionHandle>> ready) {
  auto it = files_.find(file_id);
  if (it == files_.end() || it->second.state != FileState::open) {
    ready(Error(ErrorCode::closed, "file " + std::to_string(file_id) + " is not open"));
    return;
  }
  FileRecord& file = it->second;
  const std::uint64_t size = file.handle.size;
  if (offset > size || bytes > size - offset) {
    ready(Error(ErrorCode::out_of_range, "session [" + std::to_string(offset) + ", +" + std::to_string(bytes) +
                                             ") exceeds file of " + std::to_string(size) + " bytes"));
    return;
  }

  rt::Runtime& runtime = *shared_->runtime;
  const std::uint64_t sid = next_session_id_++;
  const std::uint32_t num_readers = file.handle.options.num_readers;
  SessionInfo info;
  info.handle = SessionHandle{sid, file_id, partition::SessionExtent{offset, bytes, num_readers}};
  info.metrics = std::make_shared<MetricsCounters>();
  {
    std::lock_guard lock(shared_->metrics_mutex);
    shared_->metrics[sid] = info.metrics;
  }

  const std::uint32_t executors = runtime.num_executors();
  info.readers = runtime.create_array<BufferReader>(
      num_readers,
      [&](std::size_t i) {
        return std::make_unique<BufferReader>(shared_, sid,
                                              partition::chunk_bounds(info.handle.extent, static_cast<std::uint32_t>(i)),
                                              file.backend, info.metrics);
      },
      [executors](std::size_t i) { return rt::ExecutorId{static_cast<std::uint32_t>(i % executors)}; });

  SessionRecord& rec = sessions_[sid];
  rec.info = info;
  rec.ready = std::move(ready);
  ++file.live_sessions;

  rt::ObjectRef me = self();
  broadcast([info, me](Manager& m) {
    m.session_started(info);
    rt::Runtime::current().send<Director>(me, [sid = info.handle.session_id](Director& d) { d.session_ack(sid); });
  });
  for (rt::ObjectRef reader : info.readers.elements) {
    runtime.send<BufferReader>(reader, [me, sid](BufferReader& r) {
      r.start();
      rt::Runtime::current().send<Director>(me, [sid](Director& d) { d.session_ack(sid); });
    });
  }
}

void Director::session_ack(std::uint64_t session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return;
  SessionRecord& rec = it->second;
  const std::uint32_t needed = shared_->runtime->num_executors() + rec.info.handle.extent.num_readers;
  if (++rec.acks == needed) {
    rec.state = SessionState::open;
    rec.ready(rec.info.handle);
    rec.ready = {};
  }
}

void Director::close_session(std::uint64_t session_id, rt::Callback<Status> after_end) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    after_end(Error(ErrorCode::closed, "session " + std::to_string(session_id) + " is not open"));
    return;
  }
  SessionRecord& rec = it->second;
  if (rec.state != SessionState::open) {
    after_end(Error(ErrorCode::busy, "session " + std::to_string(session_id) + " is starting or closing"));
    return;
  }
  rec.state = SessionState::polling;
  rec.acks = 0;
  rec.outstanding = 0;
  rec.after_end = std::move(after_end);
  broadcast([session_id](Manager& m) { m.begin_close(session_id); });
}

void Director::close_poll(std::uint64_t session_id, std::uint64_t outstanding) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end() || it->second.state != SessionState::polling) return;
  SessionRecord& rec = it->second;
  rec.outstanding += outstanding;
  if (++rec.acks < shared_->runtime->num_executors()) return;

  if (rec.outstanding > 0) {
    broadcast([session_id](Manager& m) { m.cancel_close(session_id); });
    rec.state = SessionState::open;
    rec.after_end(Error(ErrorCode::busy, std::to_string(rec.outstanding) + " reads of session " +
                                             std::to_string(session_id) + " are still outstanding"));
    rec.after_end = {};
    return;
  }
  rec.state = SessionState::purging;
  rec.acks = 0;
  broadcast([session_id](Manager& m) { m.purge(session_id); });
  for (rt::ObjectRef reader : rec.info.readers.elements) shared_->runtime->destroy(reader);
}

void Director::session_purged(std::uint64_t session_id) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end() || it->second.state != SessionState::purging) return;
  SessionRecord& rec = it->second;
  if (++rec.acks < shared_->runtime->num_executors()) return;
  auto file = files_.find(rec.info.handle.file_id);
  if (file != files_.end()) --file->second.live_sessions;
  rt::Callback<Status> after_end = std::move(rec.after_end);
  sessions_.erase(it);
  after_end(Status::Ok());
}

void Director::close_file(std::uint64_t file_id, rt::Callback<Status> closed) {
  auto it = files_.find(file_id);
  if (it == files_.end() || it->second.state != FileState::open) {
    closed(Error(ErrorCode::closed, "file " + std::to_string(file_id) + " is not open"));
    return;
  }
  FileRecord& rec = it->second;
  if (rec.live_sessions > 0) {
    closed(Error(ErrorCode::busy, std::to_string(rec.live_sessions) + " sessions of file " +
                                      std::to_string(file_id) + " are still open"));
    return;
  }
  rec.state = FileState::closing;
  rec.acks = 0;
  rec.closed = std::move(closed);
  rt::ObjectRef me = self();
  broadcast([file_id, me](Manager& m) {
    m.drop_file(file_id);
    rt::Runtime::current().send<Director>(me, [file_id](Director& d) { d.file_dropped(file_id); });
  });
}

void Director::file_dropped(std::uint64_t file_id) {
  auto it = files_.find(file_id);
  if (it == files_.end() || it->second.state != FileState::closing) return;
  if (++it->second.acks < shared_->runtime->num_executors()) return;
  rt::Callback<Status> closed = std::move(it->second.closed);
  files_.erase(it);
  closed(Status::Ok());
}

}  // namespace aggio::ckio
