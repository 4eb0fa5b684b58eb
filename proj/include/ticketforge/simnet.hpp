#pragma once

#include <cstdint>
#include <queue>
#include <random>
#include <vector>

#include "ticketforge/config.hpp"
#include "ticketforge/trace.hpp"

namespace ticketforge {

// Seeded generator with a portable bounded draw (std distributions are not
// specified bit-for-bit across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [lo, hi].
  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const auto span = static_cast<unsigned __int128>(hi - lo) + 1;
    const auto draw = (static_cast<unsigned __int128>(next()) * span) >> 64;
    return lo + static_cast<std::int64_t>(draw);
  }

 private:
  std::mt19937_64 engine_;
};

struct DelaySample {
  bool dropped = false;
  Micros delay = 0;
};

// Before GST: base + jitter + extra (or a drop), never arriving later than
// GST + delta. After GST: base + jitter clamped to delta.
DelaySample sample_delay(const NetProfile& net, Micros now, Micros gst, Rng& rng);

template <typename Payload>
class EventQueue {
 public:
  struct Entry {
    Micros at;
    std::uint64_t seq;
    Payload payload;
  };

  void push(Micros at, Payload payload) { heap_.push(Entry{at, next_seq_++, std::move(payload)}); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

  Entry pop() {
    Entry top = std::move(const_cast<Entry&>(heap_.top()));
    heap_.pop();
    return top;
  }

 private:
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

// Validates the config and simulates it to quiescence. Proposals, timers and
// ticket requests stop at config.duration; in-flight work drains afterwards.
Trace run(const ScenarioConfig& config);

}  // namespace ticketforge
