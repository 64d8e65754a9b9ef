#include "plc/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace plc {

namespace {

using nlohmann::json;

void reject_unknown(const json& object, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& item : object.items()) {
    if (!allowed.count(item.key())) {
      throw std::runtime_error(where + ": unknown key \"" + item.key() + "\"");
    }
  }
}

void apply_probe(const json& section, ProbeConfig& probe) {
  reject_unknown(section,
                 {"address", "block_size_bytes", "duration_s", "interval_s", "epoch_time",
                  "payload_seed", "accept_timeout_s"},
                 "config.probe");
  if (section.contains("address")) probe.address = section.at("address").get<std::string>();
  if (section.contains("block_size_bytes")) {
    probe.block_size_bytes = section.at("block_size_bytes").get<std::size_t>();
  }
  if (section.contains("duration_s")) {
    probe.duration_s = section.at("duration_s").get<std::int64_t>();
  }
  if (section.contains("interval_s")) probe.interval_s = section.at("interval_s").get<double>();
  if (section.contains("epoch_time")) probe.epoch_time = section.at("epoch_time").get<bool>();
  if (section.contains("payload_seed")) {
    probe.payload_seed = section.at("payload_seed").get<std::uint64_t>();
  }
  if (section.contains("accept_timeout_s")) {
    probe.accept_timeout_s = section.at("accept_timeout_s").get<double>();
  }
}

void apply_detector(const json& section, DetectorConfig& detector) {
  reject_unknown(section,
                 {"baseline_window", "onset_threshold_frac", "offset_threshold_frac",
                  "min_event_s", "min_gap_s"},
                 "config.detector");
  if (section.contains("baseline_window")) {
    detector.baseline_window = section.at("baseline_window").get<int>();
  }
  if (section.contains("onset_threshold_frac")) {
    detector.onset_threshold_frac = section.at("onset_threshold_frac").get<double>();
  }
  if (section.contains("offset_threshold_frac")) {
    detector.offset_threshold_frac = section.at("offset_threshold_frac").get<double>();
  }
  if (section.contains("min_event_s")) detector.min_event_s = section.at("min_event_s").get<int>();
  if (section.contains("min_gap_s")) detector.min_gap_s = section.at("min_gap_s").get<int>();
}

void apply_classify(const json& section, ClassifyConfig& classify) {
  reject_unknown(section, {"tau_margin", "tau_unknown", "sigma_floor_frac"},
                 "config.classify");
  if (section.contains("tau_margin")) classify.tau_margin = section.at("tau_margin").get<double>();
  if (section.contains("tau_unknown")) {
    classify.tau_unknown = section.at("tau_unknown").get<double>();
  }
  if (section.contains("sigma_floor_frac")) {
    classify.sigma_floor_frac = section.at("sigma_floor_frac").get<double>();
  }
}

void apply_channel(const json& section, ChannelConfig& channel) {
  reject_unknown(section,
                 {"base_bandwidth_bps", "noise_std_frac", "drift_walk_std_frac",
                  "drift_bounds", "seed"},
                 "config.channel");
  if (section.contains("base_bandwidth_bps")) {
    channel.base_bandwidth_bps = section.at("base_bandwidth_bps").get<double>();
  }
  if (section.contains("noise_std_frac")) {
    channel.noise_std_frac = section.at("noise_std_frac").get<double>();
  }
  if (section.contains("drift_walk_std_frac")) {
    channel.drift_walk_std_frac = section.at("drift_walk_std_frac").get<double>();
  }
  if (section.contains("drift_bounds")) {
    const auto& bounds = section.at("drift_bounds");
    if (!bounds.is_array() || bounds.size() != 2) {
      throw std::runtime_error("config.channel.drift_bounds: expected [lo, hi]");
    }
    channel.drift_bounds = {bounds[0].get<double>(), bounds[1].get<double>()};
  }
  if (section.contains("seed")) channel.seed = section.at("seed").get<std::uint64_t>();
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& content) {
  json root;
  try {
    root = json::parse(content);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw std::runtime_error("config: expected a JSON object");
  reject_unknown(root, {"probe", "detector", "classify", "channel"}, "config");

  PipelineConfig config;
  if (root.contains("probe")) apply_probe(root.at("probe"), config.probe);
  if (root.contains("detector")) apply_detector(root.at("detector"), config.detector);
  if (root.contains("classify")) apply_classify(root.at("classify"), config.classify);
  if (root.contains("channel")) {
    ChannelConfig channel;
    apply_channel(root.at("channel"), channel);
    validate_channel_config(channel);
    config.channel = channel;
  }
  validate_detector_config(config.detector);
  return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_pipeline_config(buffer.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

DemoResult run_demo(const Scenario& scenario, const DemoOptions& options) {
  if (options.seeds < 2) throw std::invalid_argument("demo: needs at least 2 seeds");
  if (scenario.appliances.empty()) throw std::invalid_argument("demo: no appliances");

  std::vector<std::string> ids;
  ids.reserve(scenario.appliances.size());
  for (const auto& appliance : scenario.appliances) ids.push_back(appliance.id);
  const Schedule schedule = run_protocol(ids, options.on_s, options.gap_s);
  const auto label_of = scenario.label_of();

  // The trace runs one gap past the last off so closure confirms in-trace.
  const std::int64_t duration =
      schedule.entries.back().t_off + options.gap_s;

  DemoResult result;
  result.run_duration_s = duration;
  result.calibration_runs = options.seeds / 2;
  result.evaluation_runs = options.seeds - result.calibration_runs;

  std::map<std::string, Observations> pooled;
  for (int i = 0; i < result.calibration_runs; ++i) {
    const auto seed = options.base_seed + static_cast<std::uint64_t>(i);
    const Trace trace =
        generate_trace(scenario.channel, scenario.appliances, schedule, duration, seed);
    const auto cal = calibrate(trace, schedule, options.detector, label_of);
    for (const auto& [label, obs] : cal.observations) {
      auto& into = pooled[label];
      into.drop_fracs.insert(into.drop_fracs.end(), obs.drop_fracs.begin(),
                             obs.drop_fracs.end());
      into.drops_bps.insert(into.drops_bps.end(), obs.drops_bps.begin(),
                            obs.drops_bps.end());
    }
  }
  result.signatures = signatures_from_observations(pooled);
  if (result.signatures.empty()) {
    throw std::runtime_error("demo: calibration produced no signatures");
  }

  std::vector<EvaluationMetrics> runs;
  runs.reserve(static_cast<std::size_t>(result.evaluation_runs));
  for (int i = 0; i < result.evaluation_runs; ++i) {
    const auto seed =
        options.base_seed + static_cast<std::uint64_t>(result.calibration_runs + i);
    const Trace trace =
        generate_trace(scenario.channel, scenario.appliances, schedule, duration, seed);
    const auto events = detect_events(trace, options.detector);
    const auto classifications = classify(events, result.signatures, options.classify);
    runs.push_back(
        evaluate(classifications, schedule, options.timing_tolerance_s, label_of));
  }
  result.metrics = merge_metrics(runs);

  for (const auto& [truth_label, row] : result.metrics.confusion) {
    int matched = 0;
    int ambiguous = 0;
    for (const auto& [predicted, count] : row) {
      if (predicted == "(missed)") continue;
      matched += count;
      if (predicted == "(ambiguous)") ambiguous += count;
    }
    if (matched > 0) {
      result.ambiguous_frac_by_label[truth_label] =
          static_cast<double>(ambiguous) / matched;
    }
  }
  return result;
}

std::string format_metrics_table(const EvaluationMetrics& metrics) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "events detected     " << metrics.n_events << "\n";
  out << "scheduled intervals " << metrics.n_truth << "\n";
  out << "true positives      " << metrics.true_positives << "\n";
  out << "false positives     " << metrics.false_positives << "\n";
  out << "false negatives     " << metrics.false_negatives << "\n";
  out << "precision           " << metrics.precision << "\n";
  out << "recall              " << metrics.recall << "\n";
  out << "f1                  " << metrics.f1 << "\n";
  out << "accuracy (credited) " << metrics.accuracy_credited << "\n";
  out << "accuracy (strict)   " << metrics.accuracy_strict << "\n";
  out << "ambiguous matches   " << metrics.ambiguous_matched << "\n";
  out << "onset error mean    " << metrics.mean_abs_onset_error_s << " s\n";
  out << "onset error p95     " << metrics.onset_error_p95_s << " s\n";
  if (!metrics.confusion.empty()) {
    out << "confusion (truth -> predicted: count)\n";
    for (const auto& [truth_label, row] : metrics.confusion) {
      for (const auto& [predicted, count] : row) {
        out << "  " << truth_label << " -> " << predicted << ": " << count << "\n";
      }
    }
  }
  return out.str();
}

std::string format_signature_table(const std::vector<Signature>& signatures) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "label" << std::right << std::setw(14)
      << "mean_bps" << std::setw(12) << "std_bps" << std::setw(12) << "mean_frac"
      << std::setw(8) << "n" << "\n";
  out << std::fixed;
  for (const auto& sig : signatures) {
    out << std::left << std::setw(14) << sig.label << std::right << std::setprecision(0)
        << std::setw(14) << sig.drop_mean_bps << std::setw(12) << sig.drop_std_bps
        << std::setprecision(4) << std::setw(12) << sig.drop_mean_frac << std::setw(8)
        << sig.n_observations << "\n";
  }
  return out.str();
}

}  // namespace plc
