// plc-disagg: one binary for the whole pipeline. Measurement (recv/send),
// simulation and live throttling (simulate/proxy), event detection (detect),
// and disaggregation (calibrate/classify/eval/run-protocol/demo).
//
// Exit codes: 0 success, 1 operational failure, 2 usage error.
// Human-readable notes go to stderr; data goes to --out (default stdout).

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "plc/channel.hpp"
#include "plc/detect.hpp"
#include "plc/disagg.hpp"
#include "plc/pipeline.hpp"
#include "plc/probe.hpp"
#include "plc/proxy.hpp"
#include "plc/scenario.hpp"
#include "plc/trace.hpp"
#include "plc/version.hpp"

namespace {

std::string version_string() {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s (protocol 0x%02x)", plc::kVersion,
                static_cast<unsigned>(plc::kProtocolVersion));
  return buf;
}

void write_output(const std::string& out, const std::string& content) {
  if (out == "-") {
    std::cout << content;
    std::cout.flush();
    if (!std::cout) throw std::runtime_error("failed writing to stdout");
    return;
  }
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + out + " for writing");
  file << content;
  file.flush();
  if (!file) throw std::runtime_error("failed writing " + out);
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream buffer;
    buffer << std::cin.rdbuf();
    return buffer.str();
  }
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

plc::PipelineConfig config_or_default(const std::string& path) {
  if (path.empty()) return {};
  return plc::load_pipeline_config(path);
}

// Shared option bundles. Values land on top of the config file's values only
// when the flag was given explicitly, so precedence is defaults < file < flag.
struct DetectorFlags {
  int window = 31;
  double onset = 0.05;
  double offset = 0.03;
  int confirm = 5;
  int min_gap = 3;
  CLI::Option* o_window = nullptr;
  CLI::Option* o_onset = nullptr;
  CLI::Option* o_offset = nullptr;
  CLI::Option* o_confirm = nullptr;
  CLI::Option* o_min_gap = nullptr;

  void attach(CLI::App* cmd) {
    o_window = cmd->add_option("--baseline-window", window,
                               "rolling-median window, odd sample count");
    o_onset = cmd->add_option("--onset-threshold", onset,
                              "open when throughput < baseline*(1-x)");
    o_offset = cmd->add_option("--offset-threshold", offset,
                               "close when throughput >= baseline*(1-x)");
    o_confirm = cmd->add_option("--confirm-samples", confirm,
                                "consecutive samples to confirm open/close");
    o_min_gap = cmd->add_option("--min-gap", min_gap,
                                "merge events separated by less than this");
  }

  plc::DetectorConfig merge(const plc::DetectorConfig& base) const {
    plc::DetectorConfig cfg = base;
    if (o_window->count()) cfg.baseline_window = window;
    if (o_onset->count()) cfg.onset_threshold_frac = onset;
    if (o_offset->count()) cfg.offset_threshold_frac = offset;
    if (o_confirm->count()) cfg.min_event_s = confirm;
    if (o_min_gap->count()) cfg.min_gap_s = min_gap;
    return cfg;
  }
};

struct ClassifyFlags {
  double tau_margin = 1.0;
  double tau_unknown = 4.0;
  double sigma_floor = 0.005;
  CLI::Option* o_margin = nullptr;
  CLI::Option* o_unknown = nullptr;
  CLI::Option* o_floor = nullptr;

  void attach(CLI::App* cmd) {
    o_margin = cmd->add_option("--tau-margin", tau_margin,
                               "z gap below which candidates tie (ambiguous)");
    o_unknown = cmd->add_option("--tau-unknown", tau_unknown,
                                "best z above this is unknown");
    o_floor = cmd->add_option("--sigma-floor", sigma_floor,
                              "minimum signature spread, fraction");
  }

  plc::ClassifyConfig merge(const plc::ClassifyConfig& base) const {
    plc::ClassifyConfig cfg = base;
    if (o_margin->count()) cfg.tau_margin = tau_margin;
    if (o_unknown->count()) cfg.tau_unknown = tau_unknown;
    if (o_floor->count()) cfg.sigma_floor_frac = sigma_floor;
    return cfg;
  }
};

plc::TraceFormat resolve_format(const std::string& flag, const std::string& out) {
  if (flag == "csv") return plc::TraceFormat::csv;
  if (flag == "jsonl") return plc::TraceFormat::jsonl;
  if (out != "-") return plc::format_for_path(out);
  return plc::TraceFormat::csv;
}

plc::Scenario load_scenario_with_overlap(const std::string& path, bool allow_overlap) {
  if (!allow_overlap) return plc::load_scenario(path);
  // The overlap switch has to land before validation rejects the schedule.
  auto root = nlohmann::json::parse(read_input(path));
  root["allow_overlap"] = true;
  return plc::parse_scenario(root.dump());
}

nlohmann::json metrics_to_json(const plc::EvaluationMetrics& m) {
  nlohmann::json j;
  j["n_events"] = m.n_events;
  j["n_truth"] = m.n_truth;
  j["true_positives"] = m.true_positives;
  j["false_positives"] = m.false_positives;
  j["false_negatives"] = m.false_negatives;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["accuracy_credited"] = m.accuracy_credited;
  j["accuracy_strict"] = m.accuracy_strict;
  j["ambiguous_matched"] = m.ambiguous_matched;
  j["mean_abs_onset_error_s"] = m.mean_abs_onset_error_s;
  j["onset_error_p95_s"] = m.onset_error_p95_s;
  j["confusion"] = m.confusion;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PLC goodput probing and appliance disaggregation"};
  app.require_subcommand(1);
  app.set_version_flag("--version,-V", version_string());

  int rc = 0;

  // ---- recv ----
  auto* recv = app.add_subcommand("recv", "Accept one sender and record goodput");
  std::string recv_listen;
  std::string recv_out = "-";
  std::string recv_format;
  std::string recv_config;
  std::int64_t recv_duration = 0;
  double recv_interval = 1.0;
  double recv_accept_timeout = 0.0;
  bool recv_epoch = false;
  recv->add_option("--listen,-l", recv_listen, "host:port to listen on")->required();
  recv->add_option("--out,-o", recv_out, "trace file, - for stdout");
  recv->add_option("--format", recv_format, "csv or jsonl (default: by extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  auto* recv_o_duration =
      recv->add_option("--duration,-d", recv_duration, "seconds, 0 = until sender stops");
  auto* recv_o_interval = recv->add_option("--interval", recv_interval, "sample period, s");
  auto* recv_o_accept = recv->add_option("--accept-timeout", recv_accept_timeout,
                                         "give up if no sender arrives, s");
  recv->add_flag("--epoch", recv_epoch, "stamp samples with wall-clock epoch seconds");
  recv->add_option("--config", recv_config, "pipeline config JSON");
  recv->callback([&] {
    auto pc = config_or_default(recv_config);
    plc::ProbeConfig cfg = pc.probe;
    cfg.address = recv_listen;
    if (recv_o_duration->count()) cfg.duration_s = recv_duration;
    if (recv_o_interval->count()) cfg.interval_s = recv_interval;
    if (recv_o_accept->count()) cfg.accept_timeout_s = recv_accept_timeout;
    if (recv_epoch) cfg.epoch_time = true;

    const auto fmt = resolve_format(recv_format, recv_out);
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (recv_out != "-") {
      file.open(recv_out, std::ios::binary | std::ios::trunc);
      if (!file) throw std::runtime_error("cannot open " + recv_out + " for writing");
      os = &file;
    }
    (*os) << plc::trace_header(fmt);
    os->flush();
    const auto summary = plc::run_receiver(cfg, [&](const plc::BandwidthSample& s) {
      (*os) << plc::format_sample(s, fmt);
      os->flush();
      return true;
    });
    if (!summary.ok()) {
      std::cerr << "recv: " << summary.error << "\n";
      rc = 1;
      return;
    }
    std::cerr << "recv: " << summary.total_bytes << " bytes over "
              << plc::format_decimal(summary.duration_s) << " s, mean "
              << plc::format_decimal(summary.mean_throughput_bps) << " bit/s, "
              << summary.n_samples << " samples\n";
  });

  // ---- send ----
  auto* send = app.add_subcommand("send", "Saturate one receiver with random payload");
  std::string send_connect;
  std::string send_config;
  std::int64_t send_duration = 0;
  std::size_t send_block = 65536;
  std::uint64_t send_seed = 1;
  send->add_option("--connect,-c", send_connect, "receiver host:port")->required();
  auto* send_o_duration =
      send->add_option("--duration,-d", send_duration, "seconds, 0 = until disconnected");
  auto* send_o_block = send->add_option("--block-size", send_block, "bytes per write");
  auto* send_o_seed = send->add_option("--payload-seed", send_seed, "payload PRNG seed");
  send->add_option("--config", send_config, "pipeline config JSON");
  send->callback([&] {
    auto pc = config_or_default(send_config);
    plc::ProbeConfig cfg = pc.probe;
    cfg.address = send_connect;
    if (send_o_duration->count()) cfg.duration_s = send_duration;
    if (send_o_block->count()) cfg.block_size_bytes = send_block;
    if (send_o_seed->count()) cfg.payload_seed = send_seed;

    const auto summary = plc::run_sender(cfg);
    if (!summary.ok()) {
      std::cerr << "send: " << summary.error << "\n";
      rc = 1;
      return;
    }
    nlohmann::json j;
    j["total_bytes"] = summary.total_bytes;
    j["duration_s"] = summary.duration_s;
    j["mean_throughput_bps"] = summary.mean_throughput_bps;
    std::cout << j.dump() << "\n";
  });

  // ---- simulate ----
  auto* simulate = app.add_subcommand("simulate", "Generate a trace from a scenario");
  std::string sim_scenario;
  std::string sim_out = "-";
  std::string sim_format;
  std::int64_t sim_duration = 0;
  std::uint64_t sim_seed = 0;
  bool sim_allow_overlap = false;
  simulate->add_option("--scenario,-s", sim_scenario, "scenario JSON")->required();
  simulate->add_option("--duration,-d", sim_duration,
                       "seconds, 0 = schedule end + 30");
  auto* sim_o_seed = simulate->add_option("--seed", sim_seed, "override the scenario seed");
  simulate->add_option("--out,-o", sim_out, "trace file, - for stdout");
  simulate->add_option("--format", sim_format, "csv or jsonl (default: by extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  simulate->add_flag("--allow-overlap", sim_allow_overlap,
                     "permit overlapping schedule entries (experimental)");
  simulate->callback([&] {
    auto scenario = load_scenario_with_overlap(sim_scenario, sim_allow_overlap);
    const auto seed = sim_o_seed->count() ? sim_seed : scenario.channel.seed;
    std::int64_t duration = sim_duration;
    if (duration == 0) {
      std::int64_t end = 0;
      for (const auto& e : scenario.schedule.entries) end = std::max(end, e.t_off);
      duration = end + 30;
    }
    const auto trace = plc::generate_trace(scenario.channel, scenario.appliances,
                                           scenario.schedule, duration, seed);
    write_output(sim_out, plc::trace_to_string(trace.samples,
                                               resolve_format(sim_format, sim_out)));
  });

  // ---- proxy ----
  auto* proxy = app.add_subcommand(
      "proxy", "Throttle one live connection through a simulated channel");
  std::string proxy_listen;
  std::string proxy_upstream;
  std::string proxy_scenario;
  std::uint64_t proxy_seed = 0;
  double proxy_depth = 0.25;
  std::size_t proxy_chunk = 16384;
  double proxy_accept_timeout = 0.0;
  int proxy_sockbuf = 0;
  proxy->add_option("--listen,-l", proxy_listen, "host:port to listen on")->required();
  proxy->add_option("--upstream,-u", proxy_upstream, "receiver host:port")->required();
  proxy->add_option("--scenario,-s", proxy_scenario, "scenario JSON")->required();
  auto* proxy_o_seed = proxy->add_option("--seed", proxy_seed, "override the scenario seed");
  proxy->add_option("--bucket-depth", proxy_depth, "burst allowance, seconds of rate");
  proxy->add_option("--chunk", proxy_chunk, "forwarding granularity, bytes");
  proxy->add_option("--accept-timeout", proxy_accept_timeout,
                    "give up if no client arrives, s");
  proxy->add_option("--socket-buffer", proxy_sockbuf,
                    "clamp socket buffers to this many bytes");
  proxy->callback([&] {
    const auto scenario = plc::load_scenario(proxy_scenario);
    const auto seed = proxy_o_seed->count() ? proxy_seed : scenario.channel.seed;
    plc::ChannelRealization channel(scenario.channel, scenario.appliances,
                                    scenario.schedule, seed);
    plc::ProxyConfig cfg;
    cfg.listen_address = proxy_listen;
    cfg.upstream_address = proxy_upstream;
    cfg.bucket_depth_s = proxy_depth;
    cfg.chunk_bytes = proxy_chunk;
    cfg.accept_timeout_s = proxy_accept_timeout;
    cfg.socket_buffer_bytes = proxy_sockbuf;
    const auto summary = plc::run_throttle_proxy(cfg, channel);
    if (!summary.ok()) {
      std::cerr << "proxy: " << summary.error << "\n";
      rc = 1;
      return;
    }
    std::cerr << "proxy: forwarded " << summary.forwarded_bytes << " bytes over "
              << plc::format_decimal(summary.duration_s) << " s\n";
  });

  // ---- detect ----
  auto* detect = app.add_subcommand("detect", "Find bandwidth-drop events in a trace");
  std::string det_trace;
  std::string det_out = "-";
  std::string det_config;
  DetectorFlags det_flags;
  detect->add_option("--trace,-t", det_trace, "trace file, - for stdin")->required();
  detect->add_option("--out,-o", det_out, "events JSONL, - for stdout");
  detect->add_option("--config", det_config, "pipeline config JSON");
  det_flags.attach(detect);
  detect->callback([&] {
    auto pc = config_or_default(det_config);
    const auto cfg = det_flags.merge(pc.detector);
    const auto trace = plc::parse_trace(read_input(det_trace));
    const auto events = plc::detect_events(trace, cfg);
    write_output(det_out, plc::events_to_jsonl(events));
    std::cerr << "detect: " << events.size() << " event(s) in " << trace.size()
              << " samples\n";
  });

  // ---- calibrate ----
  auto* calibrate = app.add_subcommand(
      "calibrate", "Learn per-appliance signatures from a labeled run");
  std::string cal_trace;
  std::string cal_schedule;
  std::string cal_scenario;
  std::string cal_out = "-";
  std::string cal_config;
  DetectorFlags cal_flags;
  calibrate->add_option("--trace,-t", cal_trace, "trace file, - for stdin")->required();
  calibrate->add_option("--schedule,-s", cal_schedule, "ground-truth schedule JSON")
      ->required();
  calibrate->add_option("--scenario", cal_scenario,
                        "scenario JSON, maps appliance ids to labels");
  calibrate->add_option("--out,-o", cal_out, "signature file, - for stdout");
  calibrate->add_option("--config", cal_config, "pipeline config JSON");
  cal_flags.attach(calibrate);
  calibrate->callback([&] {
    auto pc = config_or_default(cal_config);
    const auto cfg = cal_flags.merge(pc.detector);
    const auto trace = plc::parse_trace(read_input(cal_trace));
    const auto schedule = plc::load_schedule(cal_schedule);
    std::map<std::string, std::string> label_of;
    if (!cal_scenario.empty()) label_of = plc::load_scenario(cal_scenario).label_of();
    const auto result = plc::calibrate(trace, schedule, cfg, label_of);
    if (!result.unmatched_events.empty()) {
      std::cerr << "calibrate: " << result.unmatched_events.size()
                << " detected event(s) matched no schedule entry\n";
    }
    if (!result.missed_entries.empty()) {
      std::cerr << "calibrate: " << result.missed_entries.size()
                << " schedule entr(ies) produced no event\n";
    }
    if (result.signatures.empty()) {
      std::cerr << "calibrate: no signatures learned\n";
      rc = 1;
      return;
    }
    write_output(cal_out, plc::signatures_to_json(result.signatures));
    std::cerr << "calibrate: " << result.signatures.size() << " signature(s)\n";
  });

  // ---- classify ----
  auto* classify = app.add_subcommand("classify", "Label detected events with signatures");
  std::string cls_events;
  std::string cls_sigs;
  std::string cls_out = "-";
  std::string cls_config;
  ClassifyFlags cls_flags;
  classify->add_option("--events,-e", cls_events, "events JSONL, - for stdin")->required();
  classify->add_option("--signatures,-s", cls_sigs, "signature file")->required();
  classify->add_option("--out,-o", cls_out, "classifications JSONL, - for stdout");
  classify->add_option("--config", cls_config, "pipeline config JSON");
  cls_flags.attach(classify);
  classify->callback([&] {
    auto pc = config_or_default(cls_config);
    const auto cfg = cls_flags.merge(pc.classify);
    const auto events = plc::parse_events(read_input(cls_events));
    const auto sigs = plc::load_signatures(cls_sigs);
    const auto classifications = plc::classify(events, sigs, cfg);
    write_output(cls_out, plc::classifications_to_jsonl(classifications));
    std::cerr << "classify: " << classifications.size() << " event(s)\n";
  });

  // ---- eval ----
  auto* eval = app.add_subcommand(
      "eval", "Score classifications against a ground-truth schedule");
  std::string ev_cls;
  std::string ev_schedule;
  std::string ev_scenario;
  double ev_tolerance = 5.0;
  bool ev_json = false;
  eval->add_option("--classifications,-c", ev_cls, "classifications JSONL, - for stdin")
      ->required();
  eval->add_option("--schedule,-s", ev_schedule, "ground-truth schedule JSON")->required();
  eval->add_option("--scenario", ev_scenario,
                   "scenario JSON, maps appliance ids to labels");
  eval->add_option("--tolerance", ev_tolerance, "onset matching tolerance, s");
  eval->add_flag("--json", ev_json, "emit metrics as JSON");
  eval->callback([&] {
    const auto classifications = plc::parse_classifications(read_input(ev_cls));
    const auto schedule = plc::load_schedule(ev_schedule);
    std::map<std::string, std::string> label_of;
    if (!ev_scenario.empty()) label_of = plc::load_scenario(ev_scenario).label_of();
    const auto metrics = plc::evaluate(classifications, schedule, ev_tolerance, label_of);
    if (ev_json) {
      std::cout << metrics_to_json(metrics).dump(2) << "\n";
    } else {
      std::cout << plc::format_metrics_table(metrics);
    }
  });

  // ---- run-protocol ----
  auto* protocol = app.add_subcommand(
      "run-protocol", "Emit the one-appliance-at-a-time measurement schedule");
  std::vector<std::string> proto_labels;
  std::int64_t proto_on = 60;
  std::int64_t proto_gap = 60;
  std::string proto_out = "-";
  protocol->add_option("labels", proto_labels, "appliance ids in measurement order")
      ->required()
      ->expected(-1);
  protocol->add_option("--on", proto_on, "on time per appliance, s");
  protocol->add_option("--gap", proto_gap, "idle gap between appliances, s");
  protocol->add_option("--out,-o", proto_out, "schedule JSON, - for stdout");
  protocol->callback([&] {
    const auto schedule = plc::run_protocol(proto_labels, proto_on, proto_gap);
    write_output(proto_out, plc::schedule_to_json(schedule));
  });

  // ---- demo ----
  auto* demo = app.add_subcommand(
      "demo", "Simulated end-to-end study: calibrate, classify, score");
  std::string demo_scenario;
  std::string demo_config;
  int demo_seeds = 50;
  std::int64_t demo_on = 60;
  std::int64_t demo_gap = 60;
  double demo_tolerance = 5.0;
  std::uint64_t demo_base_seed = 1;
  DetectorFlags demo_det_flags;
  ClassifyFlags demo_cls_flags;
  demo->add_option("--scenario,-s", demo_scenario, "scenario JSON")->required();
  demo->add_option("--seeds", demo_seeds, "simulated runs (half calibrate, half evaluate)");
  demo->add_option("--on", demo_on, "on time per appliance, s");
  demo->add_option("--gap", demo_gap, "idle gap between appliances, s");
  demo->add_option("--tolerance", demo_tolerance, "onset matching tolerance, s");
  demo->add_option("--base-seed", demo_base_seed, "first run seed");
  demo->add_option("--config", demo_config, "pipeline config JSON");
  demo_det_flags.attach(demo);
  demo_cls_flags.attach(demo);
  demo->callback([&] {
    auto pc = config_or_default(demo_config);
    const auto scenario = plc::load_scenario(demo_scenario);
    plc::DemoOptions options;
    options.seeds = demo_seeds;
    options.on_s = demo_on;
    options.gap_s = demo_gap;
    options.timing_tolerance_s = demo_tolerance;
    options.base_seed = demo_base_seed;
    options.detector = demo_det_flags.merge(pc.detector);
    options.classify = demo_cls_flags.merge(pc.classify);
    const auto result = plc::run_demo(scenario, options);
    std::cout << "calibration runs " << result.calibration_runs << ", evaluation runs "
              << result.evaluation_runs << ", " << result.run_duration_s
              << " s per run\n\n";
    std::cout << plc::format_signature_table(result.signatures) << "\n";
    std::cout << plc::format_metrics_table(result.metrics);
    if (!result.ambiguous_frac_by_label.empty()) {
      std::cout << "ambiguous fraction by label\n";
      for (const auto& [label, frac] : result.ambiguous_frac_by_label) {
        std::cout << "  " << label << ": " << plc::format_decimal(frac) << "\n";
      }
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
