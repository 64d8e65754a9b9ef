#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace plc {

/// One receiver-side goodput observation.
///
/// `interval_seconds` is the actual span the bytes were counted over. It is
/// 1.0 (or the configured interval) for every sample except a trailing
/// partial interval emitted when the sender disconnects mid-interval; it is
/// not serialized, so readers see the nominal 1 s grid.
struct BandwidthSample {
  std::int64_t t = 0;            // interval start, run-relative or epoch seconds
  std::uint64_t interval_bytes = 0;
  double throughput_bps = 0.0;
  bool warmup = false;           // serialized in JSONL only
  double interval_seconds = 1.0; // in-memory only

  friend bool operator==(const BandwidthSample& a, const BandwidthSample& b) {
    return a.t == b.t && a.interval_bytes == b.interval_bytes &&
           a.throughput_bps == b.throughput_bps && a.warmup == b.warmup;
  }
};

/// A uniformly sampled (nominally 1 Hz) sequence of samples.
struct Trace {
  std::vector<BandwidthSample> samples;
  // Indices i where samples[i].t - samples[i-1].t exceeds the nominal
  // interval. read_trace flags gaps; it never fills them.
  std::vector<std::size_t> gap_indices;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
};

enum class TraceFormat { csv, jsonl };

/// Pick a format from a file extension (.jsonl/.json -> jsonl, else csv).
TraceFormat format_for_path(const std::string& path);

/// Shortest decimal string that parses back to exactly `value`, with at
/// least one fractional digit and no exponent. Used for every float this
/// toolkit writes, so identical values always serialize to identical bytes.
std::string format_decimal(double value);

/// Throws std::invalid_argument naming the first offending sample when the
/// sequence violates the sample invariants (non-negative fields, strictly
/// increasing t, throughput consistent with the byte count to within one
/// byte per interval -- simulated traces floor their byte counts).
void validate_samples(const std::vector<BandwidthSample>& samples);

/// Column header line for csv (empty for jsonl); one serialized sample.
/// trace_to_string is exactly the header followed by the formatted samples,
/// so streaming writers produce byte-identical files.
std::string trace_header(TraceFormat format);
std::string format_sample(const BandwidthSample& sample, TraceFormat format);

std::string trace_to_string(const std::vector<BandwidthSample>& samples, TraceFormat format);

/// validate_samples + atomic-ish write (fails before touching the file on
/// invalid input).
void write_trace(const std::vector<BandwidthSample>& samples, const std::string& path,
                 TraceFormat format);

/// Reads a CSV or JSONL trace (format sniffed from the first line). Throws
/// std::runtime_error with the 1-based line number on malformed rows and on
/// non-monotonic timestamps.
Trace read_trace(const std::string& path);
Trace parse_trace(const std::string& content);

}  // namespace plc
