#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <arpa/inet.h>

#include <chrono>
#include <cstring>
#include <mutex>
#include <thread>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "plc/probe.hpp"
#include "plc/version.hpp"

using plc::BandwidthSample;
using plc::ProbeConfig;
using plc::RunSummary;

namespace {

struct Collected {
  std::mutex mu;
  std::vector<BandwidthSample> samples;

  plc::SampleSink sink() {
    return [this](const BandwidthSample& s) {
      std::lock_guard lock(mu);
      samples.push_back(s);
      return true;
    };
  }
};

ProbeConfig listen_config(int port) {
  ProbeConfig cfg;
  cfg.address = "127.0.0.1:" + std::to_string(port);
  return cfg;
}

// Raw client for protocol-violation tests.
int connect_raw(int port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  for (int attempt = 0; attempt < 100; ++attempt) {
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) return fd;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  ::close(fd);
  FAIL("connect_raw could not reach the receiver");
  return -1;
}

}  // namespace

TEST_CASE("sender saturates and receiver accounts for every byte") {
  const int port = testutil::free_port();
  Collected collected;
  ProbeConfig recv_cfg = listen_config(port);
  recv_cfg.duration_s = 3;
  recv_cfg.accept_timeout_s = 10.0;

  RunSummary recv_summary;
  std::thread receiver(
      [&] { recv_summary = plc::run_receiver(recv_cfg, collected.sink()); });

  ProbeConfig send_cfg;
  send_cfg.address = "127.0.0.1:" + std::to_string(port);
  send_cfg.duration_s = 0;  // run until the receiver tears down
  const RunSummary send_summary = plc::run_sender(send_cfg);
  receiver.join();

  REQUIRE(recv_summary.ok());
  REQUIRE(send_summary.ok());
  CHECK(send_summary.total_bytes > 0);
  CHECK(recv_summary.total_bytes > 0);
  CHECK(recv_summary.duration_s == doctest::Approx(3.0).epsilon(0.2));

  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < collected.samples.size(); ++i) {
    const auto& s = collected.samples[i];
    CHECK(s.t == static_cast<std::int64_t>(i));  // consecutive interval indices
    CHECK(s.warmup == (i < 3));
    if (s.interval_seconds == 1.0) {
      CHECK(s.throughput_bps == static_cast<double>(s.interval_bytes) * 8.0);
    }
    sum += s.interval_bytes;
  }
  CHECK(sum == recv_summary.total_bytes);
  CHECK(static_cast<std::int64_t>(collected.samples.size()) == recv_summary.n_samples);
  // Loopback delivers far more than this; guards against a stuck counter.
  CHECK(recv_summary.mean_throughput_bps > 1.0e6);
}

TEST_CASE("sender EOF ends the run and flushes a trailing partial") {
  const int port = testutil::free_port();
  Collected collected;
  ProbeConfig recv_cfg = listen_config(port);
  recv_cfg.duration_s = 0;  // until the sender stops
  recv_cfg.accept_timeout_s = 10.0;

  RunSummary recv_summary;
  std::thread receiver(
      [&] { recv_summary = plc::run_receiver(recv_cfg, collected.sink()); });

  // Handshake, ~1 MiB of payload, then immediate close: the run ends inside
  // the first interval, so everything lands in one partial sample.
  const int fd = connect_raw(port);
  unsigned char hello[plc::kHandshakeSize];
  std::memcpy(hello, plc::kHandshakeMagic, 4);
  hello[4] = plc::kProtocolVersion;
  hello[5] = plc::kRoleSender;
  REQUIRE(::send(fd, hello, sizeof(hello), 0) == sizeof(hello));
  std::vector<char> payload(1 << 20, 'x');
  std::size_t sent = 0;
  while (sent < payload.size()) {
    const ssize_t n = ::send(fd, payload.data() + sent, payload.size() - sent, 0);
    REQUIRE(n > 0);
    sent += static_cast<std::size_t>(n);
  }
  ::close(fd);
  receiver.join();

  REQUIRE(recv_summary.ok());
  CHECK(recv_summary.total_bytes == payload.size());
  REQUIRE(recv_summary.n_samples >= 1);
  std::uint64_t sum = 0;
  for (const auto& s : collected.samples) sum += s.interval_bytes;
  CHECK(sum == recv_summary.total_bytes);
  const auto& last = collected.samples.back();
  CHECK(last.interval_seconds < 1.0);
  CHECK(last.throughput_bps ==
        doctest::Approx(static_cast<double>(last.interval_bytes) * 8.0 /
                        last.interval_seconds));
}

TEST_CASE("invalid handshakes are dropped and the receiver keeps waiting") {
  const int port = testutil::free_port();
  Collected collected;
  ProbeConfig recv_cfg = listen_config(port);
  recv_cfg.duration_s = 2;
  recv_cfg.accept_timeout_s = 15.0;

  RunSummary recv_summary;
  std::thread receiver(
      [&] { recv_summary = plc::run_receiver(recv_cfg, collected.sink()); });

  // Wrong magic: must be rejected without ending the run.
  const int bad = connect_raw(port);
  const char garbage[6] = {'N', 'O', 'P', 'E', 0x01, 0x01};
  ::send(bad, garbage, sizeof(garbage), 0);
  ::close(bad);

  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  ProbeConfig send_cfg;
  send_cfg.address = "127.0.0.1:" + std::to_string(port);
  send_cfg.duration_s = 0;
  const RunSummary send_summary = plc::run_sender(send_cfg);
  receiver.join();

  REQUIRE(recv_summary.ok());
  REQUIRE(send_summary.ok());
  CHECK(recv_summary.total_bytes > 0);
}

TEST_CASE("connection refused lands in the summary, not an exception") {
  ProbeConfig cfg;
  cfg.address = "127.0.0.1:1";  // reserved port, nothing listens
  cfg.duration_s = 1;
  const RunSummary summary = plc::run_sender(cfg);
  CHECK_FALSE(summary.ok());
  CHECK(summary.total_bytes == 0);
}

TEST_CASE("receiver times out when no sender arrives") {
  const int port = testutil::free_port();
  ProbeConfig cfg = listen_config(port);
  cfg.accept_timeout_s = 0.2;
  Collected collected;
  const RunSummary summary = plc::run_receiver(cfg, collected.sink());
  CHECK_FALSE(summary.ok());
  CHECK(collected.samples.empty());
}

TEST_CASE("probe config validation") {
  ProbeConfig cfg;
  cfg.address = "127.0.0.1:9";
  cfg.block_size_bytes = 0;
  CHECK_THROWS_AS(plc::validate_probe_config(cfg), std::invalid_argument);
  cfg.block_size_bytes = 1024;
  cfg.interval_s = 0.0;
  CHECK_THROWS_AS(plc::validate_probe_config(cfg), std::invalid_argument);
  cfg.interval_s = 1.0;
  cfg.duration_s = -1;
  CHECK_THROWS_AS(plc::validate_probe_config(cfg), std::invalid_argument);
  cfg.duration_s = 0;
  cfg.address.clear();
  CHECK_THROWS_AS(plc::validate_probe_config(cfg), std::invalid_argument);
}
