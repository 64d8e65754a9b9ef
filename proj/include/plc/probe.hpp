#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "plc/trace.hpp"

namespace plc {

struct ProbeConfig {
  std::string address;                 // host:port to listen on or connect to
  std::size_t block_size_bytes = 65536;  // sender write granularity
  std::int64_t duration_s = 0;         // 0 means run until the peer stops
  double interval_s = 1.0;             // receiver sampling period
  bool epoch_time = false;             // stamp samples with wall-clock seconds
  std::uint64_t payload_seed = 1;      // sender payload PRNG
  double accept_timeout_s = 0.0;       // 0 means wait indefinitely
};

void validate_probe_config(const ProbeConfig& config);

struct RunSummary {
  std::uint64_t total_bytes = 0;
  double duration_s = 0.0;
  double mean_throughput_bps = 0.0;
  std::int64_t n_samples = 0;
  std::string error;  // empty on success
  bool ok() const { return error.empty(); }
};

/// Receives one sample per interval; returning false stops the run early.
using SampleSink = std::function<bool(const BandwidthSample&)>;

/// Accepts one handshaking sender and counts received bytes per interval.
/// Samples carry consecutive interval indices (or epoch seconds), the first
/// three are flagged as warm-up, and a trailing partial interval is emitted
/// with its true elapsed time. Sum of interval_bytes equals total_bytes.
RunSummary run_receiver(const ProbeConfig& config, const SampleSink& sink);

/// Connects, handshakes, and sends PRNG-filled blocks until duration_s
/// elapses (or forever when 0). Connection failures land in the summary.
RunSummary run_sender(const ProbeConfig& config);

}  // namespace plc
