#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plc/detect.hpp"
#include "plc/disagg.hpp"
#include "plc/probe.hpp"
#include "plc/scenario.hpp"

namespace plc {

/// Optional JSON config file shared by the CLI subcommands. Every section and
/// field is optional; absent fields keep their built-in defaults. Flags given
/// on the command line override file values.
struct PipelineConfig {
  ProbeConfig probe;
  DetectorConfig detector;
  ClassifyConfig classify;
  std::optional<ChannelConfig> channel;
};

PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::string& content);

struct DemoOptions {
  int seeds = 50;            // simulated runs; first half calibrate, rest evaluate
  std::int64_t on_s = 60;    // per-appliance on time in the schedule
  std::int64_t gap_s = 60;   // idle gap between appliances
  double timing_tolerance_s = 5.0;
  std::uint64_t base_seed = 1;
  DetectorConfig detector;
  ClassifyConfig classify;
};

struct DemoResult {
  std::vector<Signature> signatures;
  EvaluationMetrics metrics;  // pooled over the evaluation runs
  int calibration_runs = 0;
  int evaluation_runs = 0;
  std::int64_t run_duration_s = 0;
  // Of the matched events whose truth is this label, the ambiguous fraction.
  std::map<std::string, double> ambiguous_frac_by_label;
};

/// End-to-end simulated study on one scenario: builds the one-at-a-time
/// measurement schedule over the scenario's appliances, calibrates signatures
/// on the first half of the seeded runs, classifies and scores the rest.
DemoResult run_demo(const Scenario& scenario, const DemoOptions& options);

std::string format_metrics_table(const EvaluationMetrics& metrics);
std::string format_signature_table(const std::vector<Signature>& signatures);

}  // namespace plc
