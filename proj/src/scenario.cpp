#include "plc/scenario.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace plc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) { ok = true; break; }
    if (!ok) fail(where + ": unknown key '" + it.key() + "'");
  }
}

ChannelConfig channel_from_json(const json& j) {
  if (!j.is_object()) fail("channel: expected an object");
  reject_unknown(j, {"base_bandwidth_bps", "noise_std_frac", "drift_walk_std_frac",
                     "drift_bounds", "seed"},
                 "channel");
  ChannelConfig c;
  if (!j.contains("base_bandwidth_bps")) fail("channel: base_bandwidth_bps is required");
  c.base_bandwidth_bps = j.at("base_bandwidth_bps").get<double>();
  if (j.contains("noise_std_frac")) c.noise_std_frac = j.at("noise_std_frac").get<double>();
  if (j.contains("drift_walk_std_frac"))
    c.drift_walk_std_frac = j.at("drift_walk_std_frac").get<double>();
  if (j.contains("drift_bounds")) {
    const auto& b = j.at("drift_bounds");
    if (!b.is_array() || b.size() != 2) fail("channel.drift_bounds: expected [lo, hi]");
    c.drift_bounds = {b[0].get<double>(), b[1].get<double>()};
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  validate_channel_config(c);
  return c;
}

ApplianceModel appliance_from_json(const json& j) {
  if (!j.is_object()) fail("appliances: expected objects");
  reject_unknown(j, {"id", "label", "location_tag", "drop_mean_frac", "drop_std_frac", "kind"},
                 "appliance");
  ApplianceModel a;
  if (!j.contains("id")) fail("appliance: id is required");
  a.id = j.at("id").get<std::string>();
  a.label = j.contains("label") ? j.at("label").get<std::string>() : a.id;
  if (j.contains("location_tag")) a.location_tag = j.at("location_tag").get<std::string>();
  if (!j.contains("drop_mean_frac")) fail("appliance " + a.id + ": drop_mean_frac is required");
  a.drop_mean_frac = j.at("drop_mean_frac").get<double>();
  if (j.contains("drop_std_frac")) a.drop_std_frac = j.at("drop_std_frac").get<double>();
  if (j.contains("kind")) a.kind = appliance_kind_from_string(j.at("kind").get<std::string>());
  return a;
}

ScheduleEntry entry_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) fail("schedule: expected [id, t_on, t_off] triples");
  ScheduleEntry e;
  e.appliance_id = j[0].get<std::string>();
  e.t_on = j[1].get<std::int64_t>();
  e.t_off = j[2].get<std::int64_t>();
  return e;
}

json entry_to_json(const ScheduleEntry& e) {
  return json::array({e.appliance_id, e.t_on, e.t_off});
}

}  // namespace

std::map<std::string, std::string> Scenario::label_of() const {
  std::map<std::string, std::string> m;
  for (const auto& a : appliances) m[a.id] = a.label;
  return m;
}

Scenario parse_scenario(const std::string& content) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::parse_error& e) {
    fail(std::string("scenario: bad json: ") + e.what());
  }
  if (!j.is_object()) fail("scenario: expected an object");
  reject_unknown(j, {"channel", "appliances", "schedule", "allow_overlap"}, "scenario");
  Scenario s;
  if (!j.contains("channel")) fail("scenario: channel is required");
  s.channel = channel_from_json(j.at("channel"));
  if (j.contains("appliances")) {
    if (!j.at("appliances").is_array()) fail("scenario.appliances: expected an array");
    for (const auto& a : j.at("appliances")) s.appliances.push_back(appliance_from_json(a));
  }
  if (j.contains("allow_overlap")) s.schedule.allow_overlap = j.at("allow_overlap").get<bool>();
  if (j.contains("schedule")) {
    if (!j.at("schedule").is_array()) fail("scenario.schedule: expected an array");
    for (const auto& e : j.at("schedule")) s.schedule.entries.push_back(entry_from_json(e));
  }
  validate_appliances(s.appliances);
  validate_schedule(s.schedule, s.appliances);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    return parse_scenario(buf.str());
  } catch (const std::exception& e) {
    fail(path + ": " + e.what());
  }
}

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["channel"] = {{"base_bandwidth_bps", s.channel.base_bandwidth_bps},
                  {"noise_std_frac", s.channel.noise_std_frac},
                  {"drift_walk_std_frac", s.channel.drift_walk_std_frac},
                  {"drift_bounds", {s.channel.drift_bounds[0], s.channel.drift_bounds[1]}},
                  {"seed", s.channel.seed}};
  j["appliances"] = json::array();
  for (const auto& a : s.appliances)
    j["appliances"].push_back({{"id", a.id},
                               {"label", a.label},
                               {"location_tag", a.location_tag},
                               {"drop_mean_frac", a.drop_mean_frac},
                               {"drop_std_frac", a.drop_std_frac},
                               {"kind", to_string(a.kind)}});
  j["schedule"] = json::array();
  for (const auto& e : s.schedule.entries) j["schedule"].push_back(entry_to_json(e));
  if (s.schedule.allow_overlap) j["allow_overlap"] = true;
  return j.dump(2) + "\n";
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail("cannot open for writing: " + path);
  f << scenario_to_json(scenario);
  if (!f) fail("write failed: " + path);
}

Schedule parse_schedule(const std::string& content) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::parse_error& e) {
    fail(std::string("schedule: bad json: ") + e.what());
  }
  Schedule sched;
  if (j.is_array()) {
    for (const auto& e : j) sched.entries.push_back(entry_from_json(e));
  } else if (j.is_object()) {
    // Accept a full scenario file and take its schedule.
    Scenario s = parse_scenario(content);
    sched = s.schedule;
  } else {
    fail("schedule: expected an array of [id, t_on, t_off]");
  }
  return sched;
}

Schedule load_schedule(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("cannot open schedule file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    return parse_schedule(buf.str());
  } catch (const std::exception& e) {
    fail(path + ": " + e.what());
  }
}

std::string schedule_to_json(const Schedule& schedule) {
  json j = json::array();
  for (const auto& e : schedule.entries) j.push_back(entry_to_json(e));
  return j.dump() + "\n";
}

void save_schedule(const Schedule& schedule, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail("cannot open for writing: " + path);
  f << schedule_to_json(schedule);
  if (!f) fail("write failed: " + path);
}

}  // namespace plc
