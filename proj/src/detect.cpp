#include "plc/detect.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace plc {

namespace {

class RollingMedian {
 public:
  explicit RollingMedian(int capacity) : capacity_(capacity) {}

  void push(double v) {
    order_.push_back(v);
    sorted_.insert(v);
    ++pushes_;
    if (static_cast<int>(order_.size()) > capacity_) {
      sorted_.erase(sorted_.find(order_.front()));
      order_.pop_front();
    }
  }

  bool empty() const { return order_.empty(); }
  std::size_t pushes() const { return pushes_; }

  double median() const {
    std::size_t n = sorted_.size();
    auto it = sorted_.begin();
    std::advance(it, (n - 1) / 2);
    if (n % 2 == 1) return *it;
    return (*it + *std::next(it)) / 2.0;
  }

 private:
  int capacity_;
  std::deque<double> order_;
  std::multiset<double> sorted_;
  std::size_t pushes_ = 0;
};

struct TimedValue {
  std::int64_t t;
  double v;
};

// Single forward pass producing the baseline series and the raw (pre-merge)
// events. Samples below the onset threshold are kept out of the median
// window even when the candidate run dies; recovery samples join the window
// once a closure is confirmed. A confirmed onset is backdated over the
// contiguous run of below-close-threshold samples leading into it: under
// hysteresis those samples could not have closed an open event, so they
// belong to it.
struct DetectorPass {
  std::vector<double> baseline;
  bool starved = false;
  std::vector<Event> events;
  std::vector<std::vector<TimedValue>> event_values;  // per event, samples in [t_on, t_off)
};

DetectorPass run_pass(const Trace& trace, const DetectorConfig& cfg) {
  DetectorPass out;
  out.baseline.assign(trace.samples.size(), std::numeric_limits<double>::quiet_NaN());

  RollingMedian window(cfg.baseline_window);
  enum class State { idle, in_event };
  State state = State::idle;
  std::vector<TimedValue> pending;    // consecutive below-onset run (idle)
  std::vector<TimedValue> sag;        // consecutive below-close run (idle); pending is its tail
  std::vector<TimedValue> recovery;   // consecutive recovered run (in_event)
  Event ev;
  std::vector<TimedValue> ev_values;
  std::size_t processed = 0;

  auto open_event = [&](double b) {
    ev = Event{};
    ev.t_on = sag.front().t;
    ev.baseline_bps = b;
    ev_values = sag;
    pending.clear();
    sag.clear();
  };
  auto close_event = [&](std::int64_t t_off) {
    ev.t_off = t_off;
    out.events.push_back(ev);
    out.event_values.push_back(std::move(ev_values));
    ev_values.clear();
    for (const auto& r : recovery) window.push(r.v);
    recovery.clear();
  };

  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto& s = trace.samples[i];
    if (s.warmup) {
      if (!window.empty()) out.baseline[i] = window.median();
      continue;
    }
    ++processed;
    if (window.empty()) {
      window.push(s.throughput_bps);
      out.baseline[i] = s.throughput_bps;
      continue;
    }
    double b = window.median();
    out.baseline[i] = b;
    double v = s.throughput_bps;

    if (state == State::idle) {
      if (v < b * (1.0 - cfg.onset_threshold_frac)) {
        pending.push_back({s.t, v});
        sag.push_back({s.t, v});
        if (static_cast<int>(pending.size()) == cfg.min_event_s) {
          open_event(b);
          state = State::in_event;
        }
      } else if (v < b * (1.0 - cfg.offset_threshold_frac)) {
        // Between the thresholds: no onset evidence by itself, but it could
        // not have closed an open event either, so a later confirmation
        // claims the whole run. Joins the window like any settled sample.
        pending.clear();
        sag.push_back({s.t, v});
        window.push(v);
      } else {
        pending.clear();  // candidate died; its outliers stay out of the window
        sag.clear();
        window.push(v);
      }
    } else {
      if (v >= b * (1.0 - cfg.offset_threshold_frac)) {
        recovery.push_back({s.t, v});
        if (static_cast<int>(recovery.size()) == cfg.min_event_s) {
          close_event(recovery.front().t);
          state = State::idle;
        }
      } else {
        // recovery run died; those samples stay inside the event interval
        for (const auto& r : recovery) ev_values.push_back(r);
        recovery.clear();
        ev_values.push_back({s.t, v});
      }
    }
  }

  if (state == State::in_event) {
    for (const auto& r : recovery) ev_values.push_back(r);
    ev.t_off.reset();  // open at trace end
    out.events.push_back(ev);
    out.event_values.push_back(std::move(ev_values));
  }

  // Leading warmup samples get the first real estimate.
  double first = std::numeric_limits<double>::quiet_NaN();
  for (double v : out.baseline)
    if (!std::isnan(v)) { first = v; break; }
  for (std::size_t i = 0; i < out.baseline.size(); ++i) {
    if (std::isnan(out.baseline[i]))
      out.baseline[i] = !std::isnan(first) ? first : trace.samples[i].throughput_bps;
    else
      break;
  }

  out.starved = processed >= 2 && window.pushes() <= 1;
  return out;
}

double median_of(std::vector<double> vals) {
  std::sort(vals.begin(), vals.end());
  std::size_t n = vals.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? vals[n / 2] : (vals[n / 2 - 1] + vals[n / 2]) / 2.0;
}

}  // namespace

void validate_detector_config(const DetectorConfig& cfg) {
  if (cfg.baseline_window < 1 || cfg.baseline_window % 2 == 0)
    throw std::invalid_argument("baseline_window must be a positive odd integer");
  if (!(cfg.onset_threshold_frac > 0.0 && cfg.onset_threshold_frac < 1.0))
    throw std::invalid_argument("onset_threshold_frac must be in (0, 1)");
  if (!(cfg.offset_threshold_frac >= 0.0 && cfg.offset_threshold_frac < cfg.onset_threshold_frac))
    throw std::invalid_argument("offset_threshold_frac must be in [0, onset_threshold_frac)");
  if (cfg.min_event_s < 1) throw std::invalid_argument("min_event_s must be >= 1");
  if (cfg.min_gap_s < 1) throw std::invalid_argument("min_gap_s must be >= 1");
}

BaselineSeries estimate_baseline(const Trace& trace, int window) {
  if (trace.empty()) throw std::invalid_argument("estimate_baseline: empty trace");
  DetectorConfig cfg;
  cfg.baseline_window = window;
  validate_detector_config(cfg);
  DetectorPass pass = run_pass(trace, cfg);
  return BaselineSeries{std::move(pass.baseline), pass.starved};
}

std::vector<Event> detect_events(const Trace& trace, const DetectorConfig& cfg) {
  validate_detector_config(cfg);
  if (trace.empty()) return {};
  DetectorPass pass = run_pass(trace, cfg);

  // Merge events separated by less than min_gap_s, then recompute magnitudes
  // over the merged spans (gap samples included; the median is robust to
  // them).
  struct Span {
    Event ev;
    std::vector<TimedValue> values;
  };
  std::vector<Span> spans;
  for (std::size_t k = 0; k < pass.events.size(); ++k)
    spans.push_back({pass.events[k], std::move(pass.event_values[k])});

  std::vector<Span> merged;
  for (auto& sp : spans) {
    if (!merged.empty() && !merged.back().ev.ongoing() &&
        sp.ev.t_on - *merged.back().ev.t_off < cfg.min_gap_s) {
      Span& prev = merged.back();
      // pull the gap samples into the merged span
      std::int64_t gap_lo = *prev.ev.t_off;
      std::int64_t gap_hi = sp.ev.t_on;
      for (const auto& s : trace.samples)
        if (s.t >= gap_lo && s.t < gap_hi && !s.warmup)
          prev.values.push_back({s.t, s.throughput_bps});
      prev.values.insert(prev.values.end(), sp.values.begin(), sp.values.end());
      prev.ev.t_off = sp.ev.t_off;
    } else {
      merged.push_back(std::move(sp));
    }
  }

  std::int64_t trace_end = trace.samples.back().t + 1;
  std::vector<Event> events;
  for (auto& sp : merged) {
    Event e = sp.ev;
    std::vector<double> vals;
    vals.reserve(sp.values.size());
    for (const auto& tv : sp.values) vals.push_back(tv.v);
    double med = median_of(std::move(vals));
    e.drop_bps = e.baseline_bps - med;
    if (!(e.drop_bps > 0.0)) continue;  // hollow after merging; not a drop
    e.drop_frac = e.drop_bps / e.baseline_bps;
    // a total outage would hit exactly 1; keep the reported fraction open
    e.drop_frac = std::min(e.drop_frac, std::nextafter(1.0, 0.0));
    e.n_samples = (e.ongoing() ? trace_end : *e.t_off) - e.t_on;
    events.push_back(e);
  }
  return events;
}

std::string events_to_jsonl(const std::vector<Event>& events) {
  std::string out;
  for (const auto& e : events) {
    out += "{\"t_on\":";
    out += std::to_string(e.t_on);
    if (!e.ongoing()) {
      out += ",\"t_off\":";
      out += std::to_string(*e.t_off);
    }
    out += ",\"drop_bps\":";
    out += format_decimal(e.drop_bps);
    out += ",\"drop_frac\":";
    out += format_decimal(e.drop_frac);
    out += ",\"baseline_bps\":";
    out += format_decimal(e.baseline_bps);
    out += ",\"n_samples\":";
    out += std::to_string(e.n_samples);
    out += "}\n";
  }
  return out;
}

void write_events(const std::vector<Event>& events, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << events_to_jsonl(events);
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<Event> parse_events(const std::string& content) {
  std::vector<Event> events;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("events line " + std::to_string(line_no) + ": " + e.what());
    }
    static const std::set<std::string> allowed = {
        "t_on", "t_off", "drop_bps", "drop_frac", "baseline_bps", "n_samples"};
    for (const auto& item : j.items()) {
      if (!allowed.count(item.key())) {
        throw std::runtime_error("events line " + std::to_string(line_no) +
                                 ": unknown key \"" + item.key() + "\"");
      }
    }
    Event e;
    e.t_on = j.at("t_on").get<std::int64_t>();
    if (j.contains("t_off")) e.t_off = j.at("t_off").get<std::int64_t>();
    e.drop_bps = j.at("drop_bps").get<double>();
    e.drop_frac = j.at("drop_frac").get<double>();
    e.baseline_bps = j.at("baseline_bps").get<double>();
    e.n_samples = j.at("n_samples").get<std::int64_t>();
    events.push_back(e);
  }
  return events;
}

std::vector<Event> read_events(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open events file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_events(buf.str());
}

}  // namespace plc
