#include "plc/disagg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
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

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

// Sample standard deviation; zero for fewer than two observations.
double stddev_of(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::int64_t event_end(const Event& event, std::int64_t horizon) {
  return event.t_off ? *event.t_off : horizon;
}

std::int64_t overlap_length(std::int64_t a_on, std::int64_t a_off, std::int64_t b_on,
                            std::int64_t b_off) {
  return std::max<std::int64_t>(0, std::min(a_off, b_off) - std::max(a_on, b_on));
}

std::string label_for(const std::string& id,
                      const std::map<std::string, std::string>& label_of) {
  auto it = label_of.find(id);
  return it == label_of.end() ? id : it->second;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  // Nearest-rank: smallest value with at least q of the mass at or below it.
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  if (rank == 0) rank = 1;
  return values[rank - 1];
}

}  // namespace

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::labeled: return "labeled";
    case Verdict::ambiguous: return "ambiguous";
    case Verdict::unknown: return "unknown";
  }
  return "unknown";
}

std::vector<Signature> parse_signatures(const std::string& content) {
  json root;
  try {
    root = json::parse(content);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("signature file: ") + e.what());
  }
  if (!root.is_array()) throw std::runtime_error("signature file: expected a JSON array");
  std::vector<Signature> sigs;
  std::set<std::string> seen;
  for (const auto& item : root) {
    if (!item.is_object()) throw std::runtime_error("signature file: expected objects");
    reject_unknown(item,
                   {"label", "drop_mean_bps", "drop_std_bps", "drop_mean_frac",
                    "n_observations"},
                   "signature");
    Signature sig;
    if (!item.contains("label")) throw std::runtime_error("signature: missing label");
    sig.label = item.at("label").get<std::string>();
    if (sig.label.empty()) throw std::runtime_error("signature: empty label");
    if (!seen.insert(sig.label).second) {
      throw std::runtime_error("signature: duplicate label \"" + sig.label + "\"");
    }
    sig.drop_mean_bps = item.value("drop_mean_bps", 0.0);
    sig.drop_std_bps = item.value("drop_std_bps", 0.0);
    if (!item.contains("drop_mean_frac")) {
      throw std::runtime_error("signature \"" + sig.label + "\": missing drop_mean_frac");
    }
    sig.drop_mean_frac = item.at("drop_mean_frac").get<double>();
    sig.n_observations = item.value("n_observations", 0);
    if (!(sig.drop_mean_frac > 0.0) || sig.drop_mean_frac >= 1.0) {
      throw std::runtime_error("signature \"" + sig.label +
                               "\": drop_mean_frac must be in (0, 1)");
    }
    if (sig.drop_std_bps < 0.0 || sig.drop_mean_bps < 0.0) {
      throw std::runtime_error("signature \"" + sig.label + "\": negative field");
    }
    sigs.push_back(std::move(sig));
  }
  return sigs;
}

std::vector<Signature> load_signatures(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_signatures(buffer.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string signatures_to_json(const std::vector<Signature>& sigs) {
  json root = json::array();
  for (const auto& sig : sigs) {
    root.push_back({{"label", sig.label},
                    {"drop_mean_bps", sig.drop_mean_bps},
                    {"drop_std_bps", sig.drop_std_bps},
                    {"drop_mean_frac", sig.drop_mean_frac},
                    {"n_observations", sig.n_observations}});
  }
  return root.dump(2) + "\n";
}

void save_signatures(const std::vector<Signature>& sigs, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << signatures_to_json(sigs);
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<Classification> classify(const std::vector<Event>& events,
                                     const std::vector<Signature>& signatures,
                                     const ClassifyConfig& config) {
  if (signatures.empty()) throw std::invalid_argument("classify: no signatures");
  if (!(config.tau_margin >= 0.0)) throw std::invalid_argument("classify: tau_margin < 0");
  if (!(config.tau_unknown > 0.0)) throw std::invalid_argument("classify: tau_unknown <= 0");
  if (!(config.sigma_floor_frac > 0.0)) {
    throw std::invalid_argument("classify: sigma_floor_frac <= 0");
  }

  std::vector<Classification> out;
  out.reserve(events.size());
  for (const auto& event : events) {
    std::vector<Candidate> scored;
    scored.reserve(signatures.size());
    for (const auto& sig : signatures) {
      const double sigma = std::max(sig.drop_std_frac(), config.sigma_floor_frac);
      scored.push_back({sig.label, std::abs(event.drop_frac - sig.drop_mean_frac) / sigma});
    }
    std::sort(scored.begin(), scored.end(), [](const Candidate& a, const Candidate& b) {
      if (a.z != b.z) return a.z < b.z;
      return a.label < b.label;
    });

    Classification c;
    c.event = event;
    if (scored.front().z > config.tau_unknown) {
      c.verdict = Verdict::unknown;
      c.candidates = {scored.front()};
    } else {
      const double best = scored.front().z;
      for (const auto& cand : scored) {
        if (cand.z - best < config.tau_margin) c.candidates.push_back(cand);
      }
      c.verdict = c.candidates.size() > 1 ? Verdict::ambiguous : Verdict::labeled;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string classifications_to_jsonl(const std::vector<Classification>& classifications) {
  std::string out;
  for (const auto& c : classifications) {
    json row;
    row["t_on"] = c.event.t_on;
    if (c.event.t_off) row["t_off"] = *c.event.t_off;
    row["drop_bps"] = c.event.drop_bps;
    row["drop_frac"] = c.event.drop_frac;
    row["baseline_bps"] = c.event.baseline_bps;
    row["n_samples"] = c.event.n_samples;
    row["verdict"] = to_string(c.verdict);
    row["label"] = c.verdict == Verdict::labeled ? c.label() : std::string(to_string(c.verdict));
    row["z"] = c.z();
    json cands = json::array();
    for (const auto& cand : c.candidates) {
      cands.push_back({{"label", cand.label}, {"z", cand.z}});
    }
    row["candidates"] = cands;
    out += row.dump();
    out += '\n';
  }
  return out;
}

void write_classifications(const std::vector<Classification>& classifications,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << classifications_to_jsonl(classifications);
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<Classification> parse_classifications(const std::string& content) {
  std::vector<Classification> out;
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
    reject_unknown(row,
                   {"t_on", "t_off", "drop_bps", "drop_frac", "baseline_bps", "n_samples",
                    "verdict", "label", "z", "candidates"},
                   "line " + std::to_string(line_no));
    Classification c;
    c.event.t_on = row.at("t_on").get<std::int64_t>();
    if (row.contains("t_off")) c.event.t_off = row.at("t_off").get<std::int64_t>();
    c.event.drop_bps = row.at("drop_bps").get<double>();
    c.event.drop_frac = row.at("drop_frac").get<double>();
    c.event.baseline_bps = row.at("baseline_bps").get<double>();
    c.event.n_samples = row.at("n_samples").get<std::int64_t>();
    const std::string verdict = row.at("verdict").get<std::string>();
    if (verdict == "labeled") c.verdict = Verdict::labeled;
    else if (verdict == "ambiguous") c.verdict = Verdict::ambiguous;
    else if (verdict == "unknown") c.verdict = Verdict::unknown;
    else throw std::runtime_error("line " + std::to_string(line_no) + ": bad verdict");
    for (const auto& cand : row.at("candidates")) {
      c.candidates.push_back(
          {cand.at("label").get<std::string>(), cand.at("z").get<double>()});
    }
    if (c.candidates.empty()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": no candidates");
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Classification> read_classifications(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_classifications(buffer.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

CalibrationResult calibrate(const Trace& trace, const Schedule& schedule,
                            const DetectorConfig& detector_config,
                            const std::map<std::string, std::string>& label_of) {
  if (schedule.entries.empty()) throw std::invalid_argument("calibrate: empty schedule");

  const auto events = detect_events(trace, detector_config);
  const std::int64_t horizon = trace.empty() ? 0 : trace.samples.back().t + 1;

  // Greedy matching by descending overlap; each event and entry used once.
  struct Pair {
    std::int64_t overlap;
    std::size_t event_idx;
    std::size_t entry_idx;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const std::int64_t e_on = events[i].t_on;
    const std::int64_t e_off = event_end(events[i], horizon);
    for (std::size_t j = 0; j < schedule.entries.size(); ++j) {
      const auto& entry = schedule.entries[j];
      const std::int64_t ov = overlap_length(e_on, e_off, entry.t_on, entry.t_off);
      // Require the event to cover at least half the scheduled interval so
      // stray blips never pollute a signature.
      if (ov * 2 >= entry.t_off - entry.t_on) pairs.push_back({ov, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.event_idx != b.event_idx) return a.event_idx < b.event_idx;
    return a.entry_idx < b.entry_idx;
  });

  std::vector<bool> event_used(events.size(), false);
  std::vector<bool> entry_used(schedule.entries.size(), false);
  CalibrationResult result;
  for (const auto& pair : pairs) {
    if (event_used[pair.event_idx] || entry_used[pair.entry_idx]) continue;
    event_used[pair.event_idx] = true;
    entry_used[pair.entry_idx] = true;
    const auto& event = events[pair.event_idx];
    const auto& entry = schedule.entries[pair.entry_idx];
    auto& obs = result.observations[label_for(entry.appliance_id, label_of)];
    obs.drop_fracs.push_back(event.drop_frac);
    obs.drops_bps.push_back(event.drop_bps);
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!event_used[i]) result.unmatched_events.push_back(events[i]);
  }
  for (std::size_t j = 0; j < schedule.entries.size(); ++j) {
    if (!entry_used[j]) result.missed_entries.push_back(schedule.entries[j]);
  }
  result.signatures = signatures_from_observations(result.observations);
  return result;
}

std::vector<Signature> signatures_from_observations(
    const std::map<std::string, Observations>& observations) {
  std::vector<Signature> sigs;
  for (const auto& [label, obs] : observations) {
    if (obs.drop_fracs.empty()) continue;
    Signature sig;
    sig.label = label;
    sig.drop_mean_frac = mean_of(obs.drop_fracs);
    sig.drop_mean_bps = mean_of(obs.drops_bps);
    sig.drop_std_bps = stddev_of(obs.drops_bps);
    sig.n_observations = static_cast<int>(obs.drop_fracs.size());
    sigs.push_back(std::move(sig));
  }
  // map iteration is already label-ordered; keep that as the contract.
  return sigs;
}

EvaluationMetrics evaluate(const std::vector<Classification>& classifications,
                           const Schedule& truth, double timing_tolerance_s,
                           const std::map<std::string, std::string>& label_of) {
  if (!(timing_tolerance_s >= 0.0)) {
    throw std::invalid_argument("evaluate: timing_tolerance_s < 0");
  }
  EvaluationMetrics m;
  m.n_events = static_cast<int>(classifications.size());
  m.n_truth = static_cast<int>(truth.entries.size());

  std::int64_t horizon = 0;
  for (const auto& c : classifications) {
    horizon = std::max(horizon, event_end(c.event, c.event.t_on + c.event.n_samples));
  }
  for (const auto& entry : truth.entries) horizon = std::max(horizon, entry.t_off);

  struct Pair {
    std::int64_t overlap;
    std::size_t event_idx;
    std::size_t entry_idx;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < classifications.size(); ++i) {
    const auto& event = classifications[i].event;
    const std::int64_t e_on = event.t_on;
    const std::int64_t e_off = event_end(event, horizon);
    for (std::size_t j = 0; j < truth.entries.size(); ++j) {
      const auto& entry = truth.entries[j];
      const std::int64_t ov = overlap_length(e_on, e_off, entry.t_on, entry.t_off);
      if (ov <= 0) continue;
      const std::int64_t shorter = std::min(e_off - e_on, entry.t_off - entry.t_on);
      if (2 * ov < shorter) continue;
      if (std::abs(static_cast<double>(e_on - entry.t_on)) > timing_tolerance_s) continue;
      pairs.push_back({ov, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.event_idx != b.event_idx) return a.event_idx < b.event_idx;
    return a.entry_idx < b.entry_idx;
  });

  std::vector<bool> event_used(classifications.size(), false);
  std::vector<bool> entry_used(truth.entries.size(), false);
  for (const auto& pair : pairs) {
    if (event_used[pair.event_idx] || entry_used[pair.entry_idx]) continue;
    event_used[pair.event_idx] = true;
    entry_used[pair.entry_idx] = true;
    ++m.true_positives;

    const auto& c = classifications[pair.event_idx];
    const auto& entry = truth.entries[pair.entry_idx];
    const std::string truth_label = label_for(entry.appliance_id, label_of);
    m.onset_errors_s.push_back(
        std::abs(static_cast<double>(c.event.t_on - entry.t_on)));

    std::string predicted;
    switch (c.verdict) {
      case Verdict::labeled:
        predicted = c.label();
        if (predicted == truth_label) {
          ++m.correct_credited;
          ++m.correct_strict;
        }
        break;
      case Verdict::ambiguous: {
        predicted = "(ambiguous)";
        ++m.ambiguous_matched;
        const bool hit = std::any_of(
            c.candidates.begin(), c.candidates.end(),
            [&](const Candidate& cand) { return cand.label == truth_label; });
        if (hit) ++m.correct_credited;
        break;
      }
      case Verdict::unknown:
        predicted = "(unknown)";
        break;
    }
    ++m.confusion[truth_label][predicted];
  }

  m.false_positives = m.n_events - m.true_positives;
  m.false_negatives = m.n_truth - m.true_positives;
  for (std::size_t j = 0; j < truth.entries.size(); ++j) {
    if (!entry_used[j]) {
      ++m.confusion[label_for(truth.entries[j].appliance_id, label_of)]["(missed)"];
    }
  }

  if (m.n_events > 0) m.precision = static_cast<double>(m.true_positives) / m.n_events;
  if (m.n_truth > 0) m.recall = static_cast<double>(m.true_positives) / m.n_truth;
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  if (m.true_positives > 0) {
    m.accuracy_credited = static_cast<double>(m.correct_credited) / m.true_positives;
    m.accuracy_strict = static_cast<double>(m.correct_strict) / m.true_positives;
    m.mean_abs_onset_error_s = mean_of(m.onset_errors_s);
    m.onset_error_p95_s = percentile(m.onset_errors_s, 0.95);
  }
  return m;
}

EvaluationMetrics merge_metrics(const std::vector<EvaluationMetrics>& runs) {
  EvaluationMetrics m;
  for (const auto& run : runs) {
    m.n_events += run.n_events;
    m.n_truth += run.n_truth;
    m.true_positives += run.true_positives;
    m.false_positives += run.false_positives;
    m.false_negatives += run.false_negatives;
    m.correct_credited += run.correct_credited;
    m.correct_strict += run.correct_strict;
    m.ambiguous_matched += run.ambiguous_matched;
    m.onset_errors_s.insert(m.onset_errors_s.end(), run.onset_errors_s.begin(),
                            run.onset_errors_s.end());
    for (const auto& [truth_label, row] : run.confusion) {
      for (const auto& [predicted, count] : row) m.confusion[truth_label][predicted] += count;
    }
  }
  if (m.n_events > 0) m.precision = static_cast<double>(m.true_positives) / m.n_events;
  if (m.n_truth > 0) m.recall = static_cast<double>(m.true_positives) / m.n_truth;
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  if (m.true_positives > 0) {
    m.accuracy_credited = static_cast<double>(m.correct_credited) / m.true_positives;
    m.accuracy_strict = static_cast<double>(m.correct_strict) / m.true_positives;
    m.mean_abs_onset_error_s = mean_of(m.onset_errors_s);
    m.onset_error_p95_s = percentile(m.onset_errors_s, 0.95);
  }
  return m;
}

Schedule run_protocol(const std::vector<std::string>& labels, std::int64_t on_s,
                      std::int64_t gap_s) {
  if (labels.empty()) throw std::invalid_argument("run_protocol: no labels");
  if (on_s < 1) throw std::invalid_argument("run_protocol: on_s < 1");
  if (gap_s < 1) throw std::invalid_argument("run_protocol: gap_s < 1");
  Schedule schedule;
  const std::int64_t period = on_s + gap_s;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    // The leading gap is the no-load stretch the baseline is estimated from;
    // an appliance switched on at t=0 would be baked into the baseline.
    const auto t0 = gap_s + static_cast<std::int64_t>(k) * period;
    schedule.entries.push_back({labels[k], t0, t0 + on_s});
  }
  return schedule;
}

}  // namespace plc
