#include "ticketforge/simnet.hpp"

#include <algorithm>

namespace ticketforge {

DelaySample sample_delay(const NetProfile& net, Micros now, Micros gst, Rng& rng) {
  const Micros base = net.base + rng.uniform(0, net.jitter);
  if (now >= gst) return DelaySample{false, std::min(base, net.delta)};
  if (net.pre_gst_loss || net.pre_gst_extra >= kForever) return DelaySample{true, 0};
  const Micros delay = base + rng.uniform(0, net.pre_gst_extra);
  return DelaySample{false, std::min(delay, gst + net.delta - now)};
}

}  // namespace ticketforge
