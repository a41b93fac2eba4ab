#include <algorithm>
#include <cstring>

#include "internal.hpp"

namespace aggio::ckio {

void ReadAssembler::expect(ReadTag tag, Pending pending) { pending_.emplace(tag.sequence, std::move(pending)); }

void ReadAssembler::on_fragment(Fragment fragment) {
  auto it = pending_.find(fragment.tag.sequence);
  if (it == pending_.end()) return;
  Pending& p = it->second;

  if (fragment.status.ok()) {
    std::memcpy(p.dest.data() + fragment.dest_offset, fragment.chunk->data() + fragment.chunk_offset, fragment.length);
  } else if (p.status.ok()) {
    p.status = fragment.status;
  }
  p.received += fragment.length;

  const auto now = Clock::now();
  const rt::Duration transfer = now - fragment.sent_at;
  p.max_transfer = std::max(p.max_transfer, transfer);
  p.max_io_wait = std::max(p.max_io_wait, fragment.io_wait);
  p.metrics->permutation_ns.fetch_add(to_ns(transfer));
  fragment.chunk.reset();

  if (p.received < p.expected) return;

  const rt::Duration wall = now - p.issued_at;
  const rt::Duration rest = wall - p.max_io_wait - p.max_transfer;
  if (rest > rt::Duration::zero()) p.metrics->overhead_ns.fetch_add(to_ns(rest));
  p.metrics->requests_completed.fetch_add(1);

  ReadResult result;
  result.status = std::move(p.status);
  result.offset = p.offset;
  result.bytes = p.expected;
  result.data = p.dest;
  rt::Callback<ReadResult> after_read = std::move(p.after_read);
  const std::uint64_t sid = p.session_id;
  pending_.erase(it);

  shared_->runtime->local<Manager>(shared_->managers).read_finished(sid);
  after_read(std::move(result));
}

}  // namespace aggio::ckio
