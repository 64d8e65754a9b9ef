#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plc/trace.hpp"

namespace plc {

struct DetectorConfig {
  int baseline_window = 31;            // W, odd
  double onset_threshold_frac = 0.05;  // open below baseline * (1 - on)
  double offset_threshold_frac = 0.03; // close at/above baseline * (1 - off), hysteresis
  int min_event_s = 5;                 // consecutive samples to confirm open/close
  int min_gap_s = 3;                   // closer events merge
};

void validate_detector_config(const DetectorConfig& config);

/// A detected bandwidth-drop interval. t_on is backdated to the start of the
/// contiguous run of below-close-threshold samples containing the confirming
/// onset run. t_off is absent when the event is still open at trace end
/// (emitted, flagged by ongoing()).
struct Event {
  std::int64_t t_on = 0;
  std::optional<std::int64_t> t_off;
  double drop_bps = 0.0;
  double drop_frac = 0.0;
  double baseline_bps = 0.0;  // baseline estimate at onset
  std::int64_t n_samples = 0;

  bool ongoing() const { return !t_off.has_value(); }
};

/// Rolling-median no-load baseline, one value per input sample. Samples
/// below the onset threshold never enter the window (even when their
/// candidate run dies), so the estimate freezes across events instead of
/// absorbing them; samples between the two thresholds do enter, including
/// any later claimed by a backdated onset. `starved` is set for the
/// pathological trace where everything after the first sample sits inside
/// an event.
struct BaselineSeries {
  std::vector<double> values;
  bool starved = false;
};

BaselineSeries estimate_baseline(const Trace& trace, int window);

/// Threshold-with-hysteresis detection over the rolling-median baseline.
/// Deterministic; returned events are sorted by t_on and never overlap.
std::vector<Event> detect_events(const Trace& trace, const DetectorConfig& config);

std::string events_to_jsonl(const std::vector<Event>& events);
void write_events(const std::vector<Event>& events, const std::string& path);
std::vector<Event> read_events(const std::string& path);
std::vector<Event> parse_events(const std::string& content);

}  // namespace plc
