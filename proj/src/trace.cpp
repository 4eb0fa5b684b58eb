#include "ticketforge/trace.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace ticketforge {
namespace {

constexpr std::array<const char*, 12> kNames = {
    "INIT",       "PHASE",        "FAULT",    "PROPOSE", "DELIVER",       "TICKET_CHECK",
    "TIMER_START", "TIMER_EXPIRE", "FINALIZE", "COMMIT",  "EPOCH_DECIDED", "GRANT",
};

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::runtime_error("bad trace " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

Micros parse_millis(std::string_view text) {
  bool negative = !text.empty() && text.front() == '-';
  if (negative) text.remove_prefix(1);
  const auto dot = text.find('.');
  Micros whole = parse_number<Micros>(text.substr(0, dot), "time");
  Micros frac = 0;
  if (dot != std::string_view::npos) {
    std::string digits(text.substr(dot + 1));
    if (digits.size() > 3) throw std::runtime_error("bad trace time precision");
    digits.resize(3, '0');
    frac = parse_number<Micros>(digits, "time");
  }
  const Micros us = whole * kMicrosPerMilli + frac;
  return negative ? -us : us;
}

}  // namespace

const char* trace_kind_name(TraceKind kind) { return kNames[static_cast<std::size_t>(kind)]; }

std::optional<TraceKind> parse_trace_kind(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (name == kNames[i]) return static_cast<TraceKind>(i);
  }
  return std::nullopt;
}

std::optional<std::string> TraceEvent::get(std::string_view key) const {
  std::string_view rest = detail;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string_view item = rest.substr(0, comma);
    const auto eq = item.find('=');
    if (eq != std::string_view::npos && item.substr(0, eq) == key) {
      return std::string(item.substr(eq + 1));
    }
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return std::nullopt;
}

std::string format_millis(Micros us) {
  std::string sign = us < 0 ? "-" : "";
  if (us < 0) us = -us;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%03lld", static_cast<long long>(us / kMicrosPerMilli),
                static_cast<long long>(us % kMicrosPerMilli));
  return sign + buf;
}

std::string format_event(const TraceEvent& e) {
  std::string line = format_millis(e.at);
  line += ' ';
  line += trace_kind_name(e.kind);
  line += ' ';
  line += std::to_string(e.node);
  line += ' ';
  line += std::to_string(e.slot);
  line += ' ';
  line += e.detail.empty() ? "-" : e.detail;
  return line;
}

TraceEvent parse_event(std::string_view line) {
  std::array<std::string_view, 5> fields;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto space = line.find(' ');
    if (i < 4 && space == std::string_view::npos) {
      throw std::runtime_error("truncated trace line: '" + std::string(line) + "'");
    }
    fields[i] = i < 4 ? line.substr(0, space) : line;
    if (i < 4) line.remove_prefix(space + 1);
  }
  TraceEvent e;
  e.at = parse_millis(fields[0]);
  auto kind = parse_trace_kind(fields[1]);
  if (!kind) throw std::runtime_error("unknown trace kind '" + std::string(fields[1]) + "'");
  e.kind = *kind;
  e.node = parse_number<NodeId>(fields[2], "node");
  e.slot = parse_number<SlotNumber>(fields[3], "slot");
  e.detail = fields[4] == "-" ? std::string() : std::string(fields[4]);
  return e;
}

void write_trace(std::ostream& out, const Trace& trace) {
  for (const auto& e : trace) out << format_event(e) << '\n';
}

Trace read_trace(std::istream& in) {
  Trace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    trace.push_back(parse_event(line));
  }
  return trace;
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trace " + path);
  return read_trace(in);
}

}  // namespace ticketforge
