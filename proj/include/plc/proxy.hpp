#pragma once

#include <cstdint>
#include <string>

#include "plc/channel.hpp"

namespace plc {

struct ProxyConfig {
  std::string listen_address;
  std::string upstream_address;
  double bucket_depth_s = 0.25;   // burst allowance, seconds at the current rate
  std::size_t chunk_bytes = 16384;  // forwarding granularity
  double accept_timeout_s = 0.0;  // 0 means wait indefinitely
  int socket_buffer_bytes = 0;    // clamp SO_SNDBUF/SO_RCVBUF when > 0
};

void validate_proxy_config(const ProxyConfig& config);

struct ProxySummary {
  std::uint64_t forwarded_bytes = 0;
  double duration_s = 0.0;        // from client accept to teardown
  std::string error;              // empty on success
  bool ok() const { return error.empty(); }
};

/// Forwards one client connection to upstream through a token bucket whose
/// refill rate tracks channel.capacity_at(k) for k = whole seconds since the
/// client connected. The handshake bytes pass unthrottled; the bucket starts
/// empty and holds at most bucket_depth_s seconds at the prevailing rate.
/// Ends cleanly when the client closes; upstream sees a half-close after the
/// last byte drains.
ProxySummary run_throttle_proxy(const ProxyConfig& config, ChannelRealization& channel);

}  // namespace plc
