#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "plc/trace.hpp"

namespace plc {

/// PLC link model: a no-load capacity that drifts as a bounded random walk,
/// multiplicative per-sample noise, and per-appliance fractional drops while
/// an appliance is on.
struct ChannelConfig {
  double base_bandwidth_bps = 1.0e8;  // B0, no-load capacity
  double noise_std_frac = 0.0;        // per-sample multiplicative Gaussian noise
  double drift_walk_std_frac = 0.0;   // random-walk step on the baseline, fraction of B0
  std::array<double, 2> drift_bounds{0.7, 1.0};  // walk clamp, fractions of B0
  std::uint64_t seed = 0;
};

enum class ApplianceKind { resistive, reactive, electronic };

const char* to_string(ApplianceKind kind);
ApplianceKind appliance_kind_from_string(const std::string& s);

/// One appliance instance. Two instances sharing a label at different
/// location_tags may carry different drop parameters; classification is by
/// label, `kind` and `location_tag` are reporting metadata.
struct ApplianceModel {
  std::string id;
  std::string label;
  std::string location_tag;
  double drop_mean_frac = 0.0;  // fractional capacity reduction while on
  double drop_std_frac = 0.0;   // across-interval spread of that reduction
  ApplianceKind kind = ApplianceKind::electronic;
};

struct ScheduleEntry {
  std::string appliance_id;
  std::int64_t t_on = 0;
  std::int64_t t_off = 0;
};

struct Schedule {
  std::vector<ScheduleEntry> entries;
  // Experimental: permit overlapping entries, composed with combine_drops.
  bool allow_overlap = false;
};

void validate_channel_config(const ChannelConfig& config);
void validate_appliances(const std::vector<ApplianceModel>& appliances);
void validate_schedule(const Schedule& schedule, const std::vector<ApplianceModel>& appliances);

/// Independent-attenuation composition for simultaneously active appliances:
/// 1 - prod(1 - d_i). Empty input yields 0. Experimental; only reachable when
/// Schedule::allow_overlap is set.
double combine_drops(const std::vector<double>& active_drops);

/// One seeded materialization of the channel model. Holds the rng state: the
/// per-entry drop draws (one per on-interval, held constant across it), the
/// baseline walk, and the per-second noise, extended lazily as capacity_at
/// asks for later seconds. Deterministic for identical inputs; independent
/// instances are safe to use from different threads.
class ChannelRealization {
 public:
  ChannelRealization(const ChannelConfig& config, std::vector<ApplianceModel> appliances,
                     Schedule schedule, std::uint64_t seed);

  /// Capacity in bits/s at second t (t >= 0):
  /// baseline(t) * (1 - effective_drop(t)) * (1 + noise_t).
  double capacity_at(std::int64_t t);

  /// The drop fraction drawn for schedule entry `index` (entries in input order).
  double entry_drop(std::size_t index) const { return entry_drops_.at(index); }

  const ChannelConfig& config() const { return config_; }

 private:
  void extend_to(std::int64_t t);
  double effective_drop(std::int64_t t) const;

  ChannelConfig config_;
  std::vector<ApplianceModel> appliances_;
  Schedule schedule_;
  std::vector<double> entry_drops_;
  std::vector<double> baseline_frac_;  // per second, fraction of B0
  std::vector<double> noise_eps_;      // per second
  struct Streams;
  std::shared_ptr<Streams> streams_;
};

/// One sample per second for t in [0, duration_s); throughput is
/// capacity_at(t), bytes are floor(throughput / 8). Identical inputs give
/// identical traces.
Trace generate_trace(const ChannelConfig& config, const std::vector<ApplianceModel>& appliances,
                     const Schedule& schedule, std::int64_t duration_s, std::uint64_t seed);

}  // namespace plc
