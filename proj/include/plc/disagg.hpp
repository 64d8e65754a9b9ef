#pragma once

#include <map>
#include <string>
#include <vector>

#include "plc/channel.hpp"
#include "plc/detect.hpp"

namespace plc {

/// Per-appliance drop statistics learned from labeled runs.
struct Signature {
  std::string label;
  double drop_mean_bps = 0.0;
  double drop_std_bps = 0.0;
  double drop_mean_frac = 0.0;
  int n_observations = 0;

  /// Fractional spread, derived from the stored bps fields (exact when the
  /// baseline is stable across observations). Zero-variance signatures fall
  /// back to the matcher's sigma floor.
  double drop_std_frac() const {
    if (drop_mean_bps <= 0.0 || drop_mean_frac <= 0.0) return 0.0;
    return drop_std_bps * (drop_mean_frac / drop_mean_bps);
  }
};

std::vector<Signature> load_signatures(const std::string& path);
std::vector<Signature> parse_signatures(const std::string& content);
std::string signatures_to_json(const std::vector<Signature>& sigs);
void save_signatures(const std::vector<Signature>& sigs, const std::string& path);

enum class Verdict { labeled, ambiguous, unknown };
const char* to_string(Verdict verdict);

struct Candidate {
  std::string label;
  double z = 0.0;
};

/// Classification of one detected event. For labeled verdicts candidates has
/// exactly the winning label; for ambiguous, every signature within
/// tau_margin of the best (>= 2); for unknown, the best match for reporting.
struct Classification {
  Event event;
  Verdict verdict = Verdict::unknown;
  std::vector<Candidate> candidates;

  const std::string& label() const { return candidates.front().label; }
  double z() const { return candidates.front().z; }
};

struct ClassifyConfig {
  double tau_margin = 1.0;        // z-gap below which candidates are ambiguous
  double tau_unknown = 4.0;       // best z above this is unknown
  double sigma_floor_frac = 0.005;  // guards zero-variance signatures
};

/// z-score nearest-signature matching on drop_frac. Deterministic; ties
/// break by lexicographic label order.
std::vector<Classification> classify(const std::vector<Event>& events,
                                     const std::vector<Signature>& signatures,
                                     const ClassifyConfig& config = {});

std::string classifications_to_jsonl(const std::vector<Classification>& classifications);
void write_classifications(const std::vector<Classification>& classifications,
                           const std::string& path);
std::vector<Classification> read_classifications(const std::string& path);
std::vector<Classification> parse_classifications(const std::string& content);

/// Per-label drop observations collected during calibration.
struct Observations {
  std::vector<double> drop_fracs;
  std::vector<double> drops_bps;
};

struct CalibrationResult {
  std::vector<Signature> signatures;            // sorted by label
  std::vector<Event> unmatched_events;          // detected but not scheduled
  std::vector<ScheduleEntry> missed_entries;    // scheduled but not detected
  std::map<std::string, Observations> observations;  // pooled per label
};

/// Detects events on a labeled run and matches them to schedule entries by
/// interval overlap (>= 50% of the entry required). label_of maps appliance
/// ids to labels; ids double as labels when absent from the map.
CalibrationResult calibrate(const Trace& trace, const Schedule& schedule,
                            const DetectorConfig& detector_config,
                            const std::map<std::string, std::string>& label_of = {});

/// Builds signatures from (possibly multi-run) pooled observations.
std::vector<Signature> signatures_from_observations(
    const std::map<std::string, Observations>& observations);

struct EvaluationMetrics {
  int n_events = 0;
  int n_truth = 0;
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int correct_credited = 0;  // ambiguous counts correct when truth is a candidate
  int correct_strict = 0;    // ambiguous counts wrong
  int ambiguous_matched = 0;
  double accuracy_credited = 0.0;
  double accuracy_strict = 0.0;
  double mean_abs_onset_error_s = 0.0;
  double onset_error_p95_s = 0.0;
  std::vector<double> onset_errors_s;  // one per matched event
  // truth label -> predicted label (or "(ambiguous)" / "(unknown)") -> count
  std::map<std::string, std::map<std::string, int>> confusion;
};

/// Scores classifications against a ground-truth schedule. Events match
/// entries greedily by descending overlap; a pair is eligible when the
/// overlap covers at least half the shorter interval and onsets agree within
/// timing_tolerance_s. Empty inputs yield zero-filled metrics.
EvaluationMetrics evaluate(const std::vector<Classification>& classifications,
                           const Schedule& truth, double timing_tolerance_s,
                           const std::map<std::string, std::string>& label_of = {});

/// Merge per-run metrics into pooled counts (ratios recomputed).
EvaluationMetrics merge_metrics(const std::vector<EvaluationMetrics>& runs);

/// The measurement protocol: a no-load lead-in of gap_s, then each label in
/// turn, on for on_s, with a gap of gap_s before the next. Entry k occupies
/// [gap + k*(on+gap), gap + k*(on+gap) + on).
Schedule run_protocol(const std::vector<std::string>& labels, std::int64_t on_s = 60,
                      std::int64_t gap_s = 60);

}  // namespace plc
