// Drives the installed binary end to end through a shell. PLC_CLI_PATH is
// injected by the build as the absolute path of the plc-disagg executable.

#include <string>

#include "doctest.h"
#include "helpers.hpp"

using testutil::CommandResult;
using testutil::TempDir;

namespace {

const std::string kCli = PLC_CLI_PATH;

const char* kScenario = R"({
  "channel": {"base_bandwidth_bps": 40000000.0, "noise_std_frac": 0.01, "seed": 7},
  "appliances": [
    {"id": "tube1", "label": "tube", "location_tag": "room_b",
     "drop_mean_frac": 0.30, "drop_std_frac": 0.01, "kind": "resistive"},
    {"id": "fan1", "label": "fan", "location_tag": "room_b",
     "drop_mean_frac": 0.18, "drop_std_frac": 0.01, "kind": "reactive"}
  ],
  "schedule": [["tube1", 30, 90], ["fan1", 150, 210]]
})";

CommandResult cli(const std::string& args, const TempDir& dir) {
  return testutil::run_command(kCli + " " + args, dir);
}

}  // namespace

TEST_CASE("--version prints the toolkit and protocol versions") {
  TempDir dir;
  const auto r = cli("--version", dir);
  CHECK(r.exit_code == 0);
  CHECK(r.out == "1.0.0 (protocol 0x01)\n");
}

TEST_CASE("usage errors exit 2") {
  TempDir dir;
  CHECK(cli("", dir).exit_code == 2);               // missing subcommand
  CHECK(cli("detect", dir).exit_code == 2);         // missing required option
  CHECK(cli("bogus-subcommand", dir).exit_code == 2);
  CHECK(cli("recv --listen x --nope", dir).exit_code == 2);
}

TEST_CASE("operational errors exit 1 with a message on stderr") {
  TempDir dir;
  const auto r = cli("detect -t " + dir.file("missing.csv"), dir);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("missing.csv") != std::string::npos);
}

TEST_CASE("full offline pipeline: simulate, detect, calibrate, classify, eval") {
  TempDir dir;
  testutil::write_file(dir.file("scenario.json"), kScenario);

  auto r = cli("simulate -s " + dir.file("scenario.json") + " -d 240 -o " +
                   dir.file("run.csv"),
               dir);
  REQUIRE(r.exit_code == 0);
  const std::string trace = testutil::read_file(dir.file("run.csv"));
  CHECK(trace.rfind("t,interval_bytes,throughput_bps\n", 0) == 0);

  r = cli("detect -t " + dir.file("run.csv") + " -o " + dir.file("events.jsonl"), dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("2 event(s)") != std::string::npos);

  r = cli("calibrate -t " + dir.file("run.csv") + " -s " + dir.file("scenario.json") +
              " --scenario " + dir.file("scenario.json") + " -o " + dir.file("sigs.json"),
          dir);
  REQUIRE(r.exit_code == 0);

  r = cli("classify -e " + dir.file("events.jsonl") + " -s " + dir.file("sigs.json") +
              " -o " + dir.file("cls.jsonl"),
          dir);
  REQUIRE(r.exit_code == 0);
  const std::string cls = testutil::read_file(dir.file("cls.jsonl"));
  CHECK(cls.find("\"label\":\"tube\"") != std::string::npos);
  CHECK(cls.find("\"label\":\"fan\"") != std::string::npos);

  r = cli("eval -c " + dir.file("cls.jsonl") + " -s " + dir.file("scenario.json") +
              " --scenario " + dir.file("scenario.json"),
          dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("precision           1.000") != std::string::npos);
  CHECK(r.out.find("recall              1.000") != std::string::npos);

  r = cli("eval --json -c " + dir.file("cls.jsonl") + " -s " + dir.file("scenario.json") +
              " --scenario " + dir.file("scenario.json"),
          dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("\"f1\": 1.0") != std::string::npos);
}

TEST_CASE("simulate is deterministic for a fixed seed") {
  TempDir dir;
  testutil::write_file(dir.file("scenario.json"), kScenario);
  REQUIRE(cli("simulate -s " + dir.file("scenario.json") + " -d 240 --seed 5 -o " +
                  dir.file("a.csv"),
              dir)
              .exit_code == 0);
  REQUIRE(cli("simulate -s " + dir.file("scenario.json") + " -d 240 --seed 5 -o " +
                  dir.file("b.csv"),
              dir)
              .exit_code == 0);
  REQUIRE(cli("simulate -s " + dir.file("scenario.json") + " -d 240 --seed 6 -o " +
                  dir.file("c.csv"),
              dir)
              .exit_code == 0);
  CHECK(testutil::read_file(dir.file("a.csv")) == testutil::read_file(dir.file("b.csv")));
  CHECK(testutil::read_file(dir.file("a.csv")) != testutil::read_file(dir.file("c.csv")));
}

TEST_CASE("run-protocol emits the schedule as JSON") {
  TempDir dir;
  const auto r = cli("run-protocol tube1 fan1 --on 60 --gap 60", dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out == "[[\"tube1\",60,120],[\"fan1\",180,240]]\n");
}

TEST_CASE("config file sets defaults and explicit flags override it") {
  TempDir dir;
  testutil::write_file(dir.file("scenario.json"), kScenario);
  REQUIRE(cli("simulate -s " + dir.file("scenario.json") + " -d 240 -o " +
                  dir.file("run.csv"),
              dir)
              .exit_code == 0);
  // Config with an onset threshold too high to see the 18% fan drop.
  testutil::write_file(dir.file("cfg.json"),
                       R"({"detector": {"onset_threshold_frac": 0.25}})");

  auto r = cli("detect -t " + dir.file("run.csv") + " --config " + dir.file("cfg.json"),
               dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("1 event(s)") != std::string::npos);

  r = cli("detect -t " + dir.file("run.csv") + " --config " + dir.file("cfg.json") +
              " --onset-threshold 0.05",
          dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("2 event(s)") != std::string::npos);

  // Unknown keys in the config are rejected, not ignored.
  testutil::write_file(dir.file("bad.json"), R"({"detector": {"onset": 0.25}})");
  r = cli("detect -t " + dir.file("run.csv") + " --config " + dir.file("bad.json"), dir);
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("unknown key") != std::string::npos);
}

TEST_CASE("demo runs the full simulated study") {
  TempDir dir;
  testutil::write_file(dir.file("scenario.json"), kScenario);
  const auto r = cli("demo -s " + dir.file("scenario.json") +
                         " --seeds 6 --on 30 --gap 30",
                     dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("label") != std::string::npos);
  CHECK(r.out.find("precision") != std::string::npos);
  CHECK(r.out.find("tube") != std::string::npos);
  CHECK(r.out.find("fan") != std::string::npos);
}

TEST_CASE("stdout and stdin work as data channels") {
  TempDir dir;
  testutil::write_file(dir.file("scenario.json"), kScenario);
  const auto piped = testutil::run_command(
      kCli + " simulate -s " + dir.file("scenario.json") + " -d 240 | " + kCli +
          " detect -t - -o " + dir.file("events.jsonl"),
      dir);
  REQUIRE(piped.exit_code == 0);
  CHECK(testutil::read_file(dir.file("events.jsonl")).find("\"t_on\":30") !=
        std::string::npos);
}
