#include "internal.hpp"

namespace aggio::ckio {

namespace {
double seconds(std::int64_t ns) { return static_cast<double>(ns) * 1e-9; }
}  // namespace

SessionMetrics MetricsCounters::snapshot() const {
  SessionMetrics m;
  m.io_time = seconds(io_ns.load());
  m.permutation_time = seconds(permutation_ns.load());
  m.overhead_time = seconds(overhead_ns.load());
  m.bytes_served = bytes_served.load();
  m.fragments = fragments.load();
  m.backend_reads = backend_reads.load();
  m.requests_completed = requests_completed.load();
  return m;
}

Input::Input(rt::Runtime& runtime, InputOptions options) : runtime_(runtime), shared_(std::make_shared<Shared>()) {
  shared_->runtime = &runtime;
  shared_->options = std::move(options);
  auto shared = shared_;
  shared_->director =
      runtime.create_object<Director>(rt::ExecutorId{0}, [shared] { return std::make_unique<Director>(shared); });
  shared_->managers = runtime.create_group<Manager>([shared](rt::ExecutorId) { return std::make_unique<Manager>(shared); });
  shared_->assemblers =
      runtime.create_group<ReadAssembler>([shared](rt::ExecutorId) { return std::make_unique<ReadAssembler>(shared); });
}

Input::~Input() {
  if (!rt::Runtime::active()) return;
  runtime_.destroy(shared_->director);
  for (rt::ObjectRef m : shared_->managers.members) runtime_.destroy(m);
  for (rt::ObjectRef a : shared_->assemblers.members) runtime_.destroy(a);
}

void Input::open(std::string path, rt::Callback<Result<FileHandle>> opened, FileOptions options) {
  runtime_.send<Director>(shared_->director, [path = std::move(path), options, opened](Director& d) mutable {
    d.open(std::move(path), options, std::move(opened));
  });
}

void Input::start_read_session(const FileHandle& file, std::uint64_t bytes, std::uint64_t offset,
                               rt::Callback<Result<SessionHandle>> ready) {
  runtime_.send<Director>(shared_->director, [id = file.file_id, bytes, offset, ready](Director& d) mutable {
    d.start_session(id, bytes, offset, std::move(ready));
  });
}

void Input::read(const SessionHandle& session, std::uint64_t bytes, std::uint64_t offset, std::span<std::byte> dest,
                 rt::Callback<ReadResult> after_read) {
  if (rt::Runtime::this_executor()) {
    runtime_.local<Manager>(shared_->managers).issue_read(session, bytes, offset, dest, std::move(after_read));
    return;
  }
  auto shared = shared_;
  runtime_.post(rt::ExecutorId{0}, [shared, session, bytes, offset, dest, after_read]() mutable {
    shared->runtime->local<Manager>(shared->managers).issue_read(session, bytes, offset, dest, std::move(after_read));
  });
}

void Input::close_read_session(const SessionHandle& session, rt::Callback<Status> after_end) {
  runtime_.send<Director>(shared_->director, [id = session.session_id, after_end](Director& d) mutable {
    d.close_session(id, std::move(after_end));
  });
}

void Input::close(const FileHandle& file, rt::Callback<Status> closed) {
  runtime_.send<Director>(shared_->director,
                          [id = file.file_id, closed](Director& d) mutable { d.close_file(id, std::move(closed)); });
}

SessionMetrics Input::metrics_snapshot(const SessionHandle& session) const {
  std::lock_guard lock(shared_->metrics_mutex);
  auto it = shared_->metrics.find(session.session_id);
  if (it == shared_->metrics.end()) return {};
  return it->second->snapshot();
}

std::uint64_t Input::live_chunk_bytes() const { return shared_->live_chunk_bytes.load(); }

}  // namespace aggio::ckio
