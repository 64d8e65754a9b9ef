#pragma once

#include <map>
#include <string>

#include "plc/channel.hpp"

namespace plc {

/// Simulator input: channel model, appliance instances, on/off schedule.
struct Scenario {
  ChannelConfig channel;
  std::vector<ApplianceModel> appliances;
  Schedule schedule;

  /// id -> label map for the defined appliances.
  std::map<std::string, std::string> label_of() const;
};

/// Strict JSON loader: unknown keys are rejected, invariants are checked.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& content);
std::string scenario_to_json(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::string& path);

/// Schedule files are a JSON array of [appliance_id, t_on, t_off] triples.
Schedule load_schedule(const std::string& path);
Schedule parse_schedule(const std::string& content);
std::string schedule_to_json(const Schedule& schedule);
void save_schedule(const Schedule& schedule, const std::string& path);

}  // namespace plc
