#pragma once

#include <thread>
#include <vector>

#include "aggio/storage.hpp"

namespace aggio::testing {

// Plays a request schedule against a live backend, one thread per request,
// and returns the wall-clock completion time of the last request.
inline storage::Duration run_schedule(storage::Backend& backend, const std::vector<storage::ReadAt>& schedule,
                                      bool* all_ok = nullptr) {
  using storage::Clock;
  std::vector<Clock::time_point> done(schedule.size());
  std::vector<char> ok(schedule.size(), 0);
  std::vector<std::thread> threads;
  const auto t0 = Clock::now() + std::chrono::milliseconds(2);
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    threads.emplace_back([&, i] {
      const auto issue = t0 + schedule[i].issue_time;
      std::this_thread::sleep_until(issue - std::chrono::microseconds(300));
      while (Clock::now() < issue) std::this_thread::yield();
      auto r = backend.read_at(schedule[i].offset, schedule[i].length);
      ok[i] = r.ok() && r->size() == schedule[i].length;
      done[i] = Clock::now();
    });
  }
  for (auto& t : threads) t.join();
  if (all_ok) {
    *all_ok = true;
    for (char c : ok) *all_ok = *all_ok && c;
  }
  storage::Duration makespan{0};
  for (auto d : done) makespan = std::max(makespan, d - t0);
  return makespan;
}

inline bool within(double measured, double predicted, double rel) {
  return measured >= predicted * (1.0 - rel) && measured <= predicted * (1.0 + rel);
}

}  // namespace aggio::testing
