#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "plc/channel.hpp"
#include "plc/trace.hpp"

using plc::ApplianceModel;
using plc::ChannelConfig;
using plc::ChannelRealization;
using plc::Schedule;
using plc::ScheduleEntry;

namespace {

ChannelConfig quiet_channel(double b0 = 4.0e7) {
  ChannelConfig cfg;
  cfg.base_bandwidth_bps = b0;
  cfg.noise_std_frac = 0.0;
  cfg.drift_walk_std_frac = 0.0;
  return cfg;
}

ApplianceModel appliance(const std::string& id, double mean, double std = 0.0) {
  ApplianceModel a;
  a.id = id;
  a.label = id;
  a.drop_mean_frac = mean;
  a.drop_std_frac = std;
  return a;
}

}  // namespace

TEST_CASE("quiet channel is exactly flat at B0") {
  auto trace = plc::generate_trace(quiet_channel(), {}, {}, 100, 1);
  REQUIRE(trace.size() == 100);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace.samples[i].t == static_cast<std::int64_t>(i));
    CHECK(trace.samples[i].throughput_bps == 4.0e7);
    CHECK(trace.samples[i].interval_bytes == 5'000'000);
  }
}

TEST_CASE("identical seeds give byte-identical traces, different seeds differ") {
  ChannelConfig cfg = quiet_channel();
  cfg.noise_std_frac = 0.02;
  cfg.drift_walk_std_frac = 0.001;
  const std::vector<ApplianceModel> apps = {appliance("a", 0.3, 0.01)};
  Schedule sched;
  sched.entries = {{"a", 10, 40}};

  const auto t1 = plc::generate_trace(cfg, apps, sched, 60, 42);
  const auto t2 = plc::generate_trace(cfg, apps, sched, 60, 42);
  const auto t3 = plc::generate_trace(cfg, apps, sched, 60, 43);
  CHECK(plc::trace_to_string(t1.samples, plc::TraceFormat::csv) ==
        plc::trace_to_string(t2.samples, plc::TraceFormat::csv));
  CHECK(plc::trace_to_string(t1.samples, plc::TraceFormat::csv) !=
        plc::trace_to_string(t3.samples, plc::TraceFormat::csv));
}

TEST_CASE("scheduled drop applies exactly while on") {
  const std::vector<ApplianceModel> apps = {appliance("a", 0.25)};
  Schedule sched;
  sched.entries = {{"a", 5, 15}};
  auto trace = plc::generate_trace(quiet_channel(4.0e7), apps, sched, 20, 7);
  for (const auto& s : trace.samples) {
    const bool on = s.t >= 5 && s.t < 15;
    CHECK(s.throughput_bps == doctest::Approx(on ? 3.0e7 : 4.0e7).epsilon(1e-12));
  }
}

TEST_CASE("per-interval drop draw is constant within an entry, varies across entries") {
  const std::vector<ApplianceModel> apps = {appliance("a", 0.3, 0.05)};
  Schedule sched;
  sched.entries = {{"a", 0, 30}, {"a", 40, 70}};
  ChannelRealization chan(quiet_channel(1.0e8), apps, sched, 11);

  const double first = 1.0 - chan.capacity_at(0) / 1.0e8;
  for (std::int64_t t = 0; t < 30; ++t) {
    CHECK(1.0 - chan.capacity_at(t) / 1.0e8 == doctest::Approx(first).epsilon(1e-12));
  }
  const double second = 1.0 - chan.capacity_at(40) / 1.0e8;
  for (std::int64_t t = 40; t < 70; ++t) {
    CHECK(1.0 - chan.capacity_at(t) / 1.0e8 == doctest::Approx(second).epsilon(1e-12));
  }
  CHECK(first != second);
  CHECK(first == doctest::Approx(chan.entry_drop(0)));
  CHECK(second == doctest::Approx(chan.entry_drop(1)));
}

TEST_CASE("drop draws stay within three sigma and never go negative") {
  const std::vector<ApplianceModel> apps = {appliance("a", 0.1, 0.03)};
  Schedule sched;
  for (int k = 0; k < 200; ++k) {
    sched.entries.push_back({"a", k * 10, k * 10 + 5});
  }
  ChannelRealization chan(quiet_channel(), apps, sched, 99);
  for (std::size_t k = 0; k < sched.entries.size(); ++k) {
    const double d = chan.entry_drop(k);
    CHECK(d >= 0.0);
    CHECK(d >= 0.1 - 3.0 * 0.03 - 1e-12);
    CHECK(d <= 0.1 + 3.0 * 0.03 + 1e-12);
  }
}

TEST_CASE("bounded drift keeps the baseline inside drift_bounds") {
  ChannelConfig cfg = quiet_channel(1.0e8);
  cfg.drift_walk_std_frac = 0.01;  // large steps to slam into the clamps
  cfg.drift_bounds = {0.7, 1.0};
  ChannelRealization chan(cfg, {}, {}, 5);
  double lo = 1.0, hi = 0.0;
  for (std::int64_t t = 0; t < 5000; ++t) {
    const double frac = chan.capacity_at(t) / 1.0e8;
    lo = std::min(lo, frac);
    hi = std::max(hi, frac);
    CHECK(frac >= 0.7 - 1e-12);
    CHECK(frac <= 1.0 + 1e-12);
  }
  // With 1% steps over 5000 s the walk must actually wander.
  CHECK(hi - lo > 0.05);
}

TEST_CASE("noise is truncated and capacity stays positive") {
  ChannelConfig cfg = quiet_channel(1.0e8);
  cfg.noise_std_frac = 0.2;  // near the validation limit
  ChannelRealization chan(cfg, {}, {}, 17);
  double sum = 0.0;
  const int n = 20000;
  for (std::int64_t t = 0; t < n; ++t) {
    const double c = chan.capacity_at(t);
    CHECK(c > 0.0);
    CHECK(c >= 1.0e8 * (1.0 - 4.0 * 0.2) - 1.0);
    CHECK(c <= 1.0e8 * (1.0 + 4.0 * 0.2) + 1.0);
    sum += c;
  }
  CHECK(sum / n == doctest::Approx(1.0e8).epsilon(0.01));
}

TEST_CASE("capacity scales linearly with B0 for the same seed") {
  ChannelConfig big = quiet_channel(1.0e8);
  big.noise_std_frac = 0.05;
  big.drift_walk_std_frac = 0.002;
  ChannelConfig small = big;
  small.base_bandwidth_bps = 4.0e7;
  const std::vector<ApplianceModel> apps = {appliance("a", 0.3, 0.02)};
  Schedule sched;
  sched.entries = {{"a", 20, 50}};
  ChannelRealization c_big(big, apps, sched, 23);
  ChannelRealization c_small(small, apps, sched, 23);
  for (std::int64_t t = 0; t < 80; ++t) {
    CHECK(c_small.capacity_at(t) / 4.0e7 ==
          doctest::Approx(c_big.capacity_at(t) / 1.0e8).epsilon(1e-12));
  }
}

TEST_CASE("generate_trace matches the realization and floors bytes") {
  ChannelConfig cfg = quiet_channel();
  cfg.noise_std_frac = 0.03;
  const auto trace = plc::generate_trace(cfg, {}, {}, 50, 31);
  ChannelRealization chan(cfg, {}, {}, 31);
  for (const auto& s : trace.samples) {
    CHECK(s.throughput_bps == chan.capacity_at(s.t));
    CHECK(s.interval_bytes == static_cast<std::uint64_t>(s.throughput_bps / 8.0));
  }
  CHECK_NOTHROW(plc::validate_samples(trace.samples));
}

TEST_CASE("combine_drops composes independent attenuations") {
  CHECK(plc::combine_drops({}) == 0.0);
  CHECK(plc::combine_drops({0.5}) == 0.5);
  CHECK(plc::combine_drops({0.5, 0.5}) == doctest::Approx(0.75));
  CHECK(plc::combine_drops({0.3, 0.2}) == doctest::Approx(0.44));
  // composition never exceeds 1 and never shrinks when a drop is added
  const std::vector<double> base = {0.1, 0.4, 0.05};
  const double with = plc::combine_drops({0.1, 0.4, 0.05, 0.2});
  CHECK(with >= plc::combine_drops(base));
  CHECK(with < 1.0);
}

TEST_CASE("overlap is rejected by default and composed when allowed") {
  const std::vector<ApplianceModel> apps = {appliance("a", 0.3), appliance("b", 0.2)};
  Schedule overlapping;
  overlapping.entries = {{"a", 0, 20}, {"b", 10, 30}};
  CHECK_THROWS_AS(plc::validate_schedule(overlapping, apps), std::invalid_argument);

  overlapping.allow_overlap = true;
  CHECK_NOTHROW(plc::validate_schedule(overlapping, apps));
  ChannelRealization chan(quiet_channel(1.0e8), apps, overlapping, 3);
  CHECK(chan.capacity_at(5) == doctest::Approx(1.0e8 * 0.7).epsilon(1e-12));
  CHECK(chan.capacity_at(15) == doctest::Approx(1.0e8 * (1.0 - 0.44)).epsilon(1e-12));
  CHECK(chan.capacity_at(25) == doctest::Approx(1.0e8 * 0.8).epsilon(1e-12));
}

TEST_CASE("validation rejects out-of-domain configs") {
  ChannelConfig cfg = quiet_channel();
  SUBCASE("non-positive bandwidth") {
    cfg.base_bandwidth_bps = 0.0;
    CHECK_THROWS_AS(plc::validate_channel_config(cfg), std::invalid_argument);
  }
  SUBCASE("noise too large for positivity under truncation") {
    cfg.noise_std_frac = 0.25;
    CHECK_THROWS_AS(plc::validate_channel_config(cfg), std::invalid_argument);
  }
  SUBCASE("inverted drift bounds") {
    cfg.drift_bounds = {0.9, 0.8};
    CHECK_THROWS_AS(plc::validate_channel_config(cfg), std::invalid_argument);
  }
  SUBCASE("appliance drop can reach 1 within three sigma") {
    const std::vector<ApplianceModel> bad = {appliance("a", 0.9, 0.05)};
    CHECK_THROWS_AS(plc::validate_appliances(bad), std::invalid_argument);
  }
  SUBCASE("duplicate appliance ids") {
    const std::vector<ApplianceModel> bad = {appliance("a", 0.1), appliance("a", 0.2)};
    CHECK_THROWS_AS(plc::validate_appliances(bad), std::invalid_argument);
  }
  SUBCASE("schedule referencing an unknown id") {
    Schedule sched;
    sched.entries = {{"ghost", 0, 10}};
    CHECK_THROWS_AS(plc::validate_schedule(sched, {appliance("a", 0.1)}),
                    std::invalid_argument);
  }
  SUBCASE("entry with t_on >= t_off") {
    Schedule sched;
    sched.entries = {{"a", 10, 10}};
    CHECK_THROWS_AS(plc::validate_schedule(sched, {appliance("a", 0.1)}),
                    std::invalid_argument);
  }
  SUBCASE("trace must cover the schedule") {
    Schedule sched;
    sched.entries = {{"a", 0, 100}};
    CHECK_THROWS_AS(
        plc::generate_trace(quiet_channel(), {appliance("a", 0.1)}, sched, 50, 1),
        std::invalid_argument);
  }
}
