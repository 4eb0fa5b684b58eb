#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ticketforge/core_log.hpp"

namespace ticketforge {

enum class TraceKind : std::uint8_t {
  Init,
  Phase,
  Fault,
  Propose,
  Deliver,
  TicketCheck,
  TimerStart,
  TimerExpire,
  Finalize,
  Commit,
  EpochDecided,
  Grant,
};

const char* trace_kind_name(TraceKind kind);
std::optional<TraceKind> parse_trace_kind(std::string_view name);

// One line of the trace: `at_ms KIND node slot detail`. `detail` is a
// comma-separated key=value list, or "-" when empty. EPOCH_DECIDED stores the
// epoch number in the slot column.
struct TraceEvent {
  Micros at = 0;
  TraceKind kind = TraceKind::Init;
  NodeId node = kNoNode;
  SlotNumber slot = 0;
  std::string detail;

  std::optional<std::string> get(std::string_view key) const;
  bool operator==(const TraceEvent&) const = default;
};

using Trace = std::vector<TraceEvent>;

std::string format_event(const TraceEvent& event);
TraceEvent parse_event(std::string_view line);  // throws std::runtime_error

void write_trace(std::ostream& out, const Trace& trace);
Trace read_trace(std::istream& in);
Trace load_trace(const std::string& path);

// Microseconds rendered as milliseconds with three decimals.
std::string format_millis(Micros us);

}  // namespace ticketforge
