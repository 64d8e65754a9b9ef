#include "plc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "gauss.hpp"

namespace plc {

namespace {

constexpr std::uint32_t kDropStream = 0xD0;
constexpr std::uint32_t kWalkStream = 0xA1;
constexpr std::uint32_t kNoiseStream = 0xB2;

// Noise is truncated at 4 sigma; keeping sigma below 1/4 keeps the factor
// (1 + eps) strictly positive, so capacity never reaches zero.
constexpr double kNoiseTrunc = 4.0;
constexpr double kMaxNoiseStd = 0.25;

// Drop draws are truncated at 3 sigma, matching the appliance invariant
// drop_mean + 3 * drop_std < 1.
constexpr double kDropTrunc = 3.0;

}  // namespace

const char* to_string(ApplianceKind kind) {
  switch (kind) {
    case ApplianceKind::resistive: return "resistive";
    case ApplianceKind::reactive: return "reactive";
    case ApplianceKind::electronic: return "electronic";
  }
  return "electronic";
}

ApplianceKind appliance_kind_from_string(const std::string& s) {
  if (s == "resistive") return ApplianceKind::resistive;
  if (s == "reactive") return ApplianceKind::reactive;
  if (s == "electronic") return ApplianceKind::electronic;
  throw std::invalid_argument("unknown appliance kind: " + s);
}

void validate_channel_config(const ChannelConfig& config) {
  if (!(config.base_bandwidth_bps > 0.0) || !std::isfinite(config.base_bandwidth_bps))
    throw std::invalid_argument("base_bandwidth_bps must be positive");
  if (config.noise_std_frac < 0.0) throw std::invalid_argument("noise_std_frac must be >= 0");
  if (config.noise_std_frac >= kMaxNoiseStd)
    throw std::invalid_argument("noise_std_frac must be < 0.25 to keep capacity positive");
  if (config.drift_walk_std_frac < 0.0)
    throw std::invalid_argument("drift_walk_std_frac must be >= 0");
  if (config.drift_bounds[0] < 0.0 || config.drift_bounds[0] > config.drift_bounds[1])
    throw std::invalid_argument("drift_bounds must satisfy 0 <= lo <= hi");
}

void validate_appliances(const std::vector<ApplianceModel>& appliances) {
  std::unordered_set<std::string> ids;
  for (const auto& a : appliances) {
    if (a.id.empty()) throw std::invalid_argument("appliance id must be non-empty");
    if (!ids.insert(a.id).second) throw std::invalid_argument("duplicate appliance id: " + a.id);
    if (a.drop_mean_frac < 0.0 || a.drop_mean_frac >= 1.0)
      throw std::invalid_argument("appliance " + a.id + ": drop_mean_frac must be in [0, 1)");
    if (a.drop_std_frac < 0.0)
      throw std::invalid_argument("appliance " + a.id + ": drop_std_frac must be >= 0");
    if (a.drop_mean_frac + 3.0 * a.drop_std_frac >= 1.0)
      throw std::invalid_argument("appliance " + a.id +
                                  ": drop_mean_frac + 3*drop_std_frac must stay below 1");
  }
}

void validate_schedule(const Schedule& schedule, const std::vector<ApplianceModel>& appliances) {
  std::unordered_set<std::string> ids;
  for (const auto& a : appliances) ids.insert(a.id);
  for (const auto& e : schedule.entries) {
    if (e.t_on >= e.t_off)
      throw std::invalid_argument("schedule entry " + e.appliance_id + ": t_on must be < t_off");
    if (e.t_on < 0) throw std::invalid_argument("schedule entry " + e.appliance_id + ": t_on < 0");
    if (!ids.count(e.appliance_id))
      throw std::invalid_argument("schedule references undefined appliance: " + e.appliance_id);
  }
  if (!schedule.allow_overlap) {
    auto sorted = schedule.entries;
    std::sort(sorted.begin(), sorted.end(),
              [](const ScheduleEntry& a, const ScheduleEntry& b) { return a.t_on < b.t_on; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (sorted[i].t_on < sorted[i - 1].t_off)
        throw std::invalid_argument(
            "overlapping schedule entries (" + sorted[i - 1].appliance_id + ", " +
            sorted[i].appliance_id + "); overlap requires the experimental composition flag");
    }
  }
}

double combine_drops(const std::vector<double>& active_drops) {
  double pass = 1.0;
  for (double d : active_drops) {
    if (d < 0.0 || d >= 1.0) throw std::invalid_argument("drop fraction must be in [0, 1)");
    pass *= 1.0 - d;
  }
  return 1.0 - pass;
}

struct ChannelRealization::Streams {
  detail::GaussStream walk;
  detail::GaussStream noise;
  Streams(std::uint64_t seed)
      : walk(seed, kWalkStream), noise(seed, kNoiseStream) {}
};

ChannelRealization::ChannelRealization(const ChannelConfig& config,
                                       std::vector<ApplianceModel> appliances, Schedule schedule,
                                       std::uint64_t seed)
    : config_(config),
      appliances_(std::move(appliances)),
      schedule_(std::move(schedule)),
      streams_(std::make_shared<Streams>(seed)) {
  validate_channel_config(config_);
  validate_appliances(appliances_);
  validate_schedule(schedule_, appliances_);

  std::unordered_map<std::string, const ApplianceModel*> by_id;
  for (const auto& a : appliances_) by_id[a.id] = &a;

  detail::GaussStream drop_stream(seed, kDropStream);
  entry_drops_.reserve(schedule_.entries.size());
  for (const auto& e : schedule_.entries) {
    const ApplianceModel& a = *by_id.at(e.appliance_id);
    double d = a.drop_mean_frac;
    if (a.drop_std_frac > 0.0) d += drop_stream.next(kDropTrunc) * a.drop_std_frac;
    entry_drops_.push_back(std::max(d, 0.0));
  }

  double lo = config_.drift_bounds[0];
  double hi = config_.drift_bounds[1];
  baseline_frac_.push_back(std::clamp(1.0, lo, hi));
  noise_eps_.push_back(config_.noise_std_frac > 0.0
                           ? streams_->noise.next(kNoiseTrunc) * config_.noise_std_frac
                           : 0.0);
}

void ChannelRealization::extend_to(std::int64_t t) {
  double lo = std::max(config_.drift_bounds[0], 1e-9);  // keep the walk off zero
  double hi = config_.drift_bounds[1];
  while (static_cast<std::int64_t>(baseline_frac_.size()) <= t) {
    double step = config_.drift_walk_std_frac > 0.0
                      ? streams_->walk.next() * config_.drift_walk_std_frac
                      : 0.0;
    baseline_frac_.push_back(std::clamp(baseline_frac_.back() + step, lo, hi));
    noise_eps_.push_back(config_.noise_std_frac > 0.0
                             ? streams_->noise.next(kNoiseTrunc) * config_.noise_std_frac
                             : 0.0);
  }
}

double ChannelRealization::effective_drop(std::int64_t t) const {
  if (!schedule_.allow_overlap) {
    for (std::size_t i = 0; i < schedule_.entries.size(); ++i) {
      const auto& e = schedule_.entries[i];
      if (t >= e.t_on && t < e.t_off) return entry_drops_[i];
    }
    return 0.0;
  }
  std::vector<double> active;
  for (std::size_t i = 0; i < schedule_.entries.size(); ++i) {
    const auto& e = schedule_.entries[i];
    if (t >= e.t_on && t < e.t_off) active.push_back(entry_drops_[i]);
  }
  return combine_drops(active);
}

double ChannelRealization::capacity_at(std::int64_t t) {
  if (t < 0) throw std::invalid_argument("capacity_at: t must be >= 0");
  extend_to(t);
  // All randomness lives in fraction space; B0 multiplies once at the end so
  // scaling B0 scales every capacity value.
  double factor =
      baseline_frac_[static_cast<std::size_t>(t)] * (1.0 - effective_drop(t)) *
      (1.0 + noise_eps_[static_cast<std::size_t>(t)]);
  return config_.base_bandwidth_bps * factor;
}

Trace generate_trace(const ChannelConfig& config, const std::vector<ApplianceModel>& appliances,
                     const Schedule& schedule, std::int64_t duration_s, std::uint64_t seed) {
  if (duration_s <= 0) throw std::invalid_argument("duration_s must be positive");
  for (const auto& e : schedule.entries)
    if (e.t_off > duration_s)
      throw std::invalid_argument("schedule entry " + e.appliance_id +
                                  " exceeds trace duration");
  ChannelRealization channel(config, appliances, schedule, seed);
  Trace trace;
  trace.samples.reserve(static_cast<std::size_t>(duration_s));
  for (std::int64_t t = 0; t < duration_s; ++t) {
    BandwidthSample s;
    s.t = t;
    s.throughput_bps = channel.capacity_at(t);
    s.interval_bytes = static_cast<std::uint64_t>(s.throughput_bps / 8.0);
    trace.samples.push_back(s);
  }
  return trace;
}

}  // namespace plc
