#include "plc/probe.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "net.hpp"
#include "plc/version.hpp"

namespace plc {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kMinPartialSeconds = 1e-6;

std::int64_t epoch_seconds_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool handshake_valid(const unsigned char (&buf)[kHandshakeSize]) {
  return std::memcmp(buf, kHandshakeMagic, sizeof(kHandshakeMagic)) == 0 &&
         buf[4] == kProtocolVersion && buf[5] == kRoleSender;
}

}  // namespace

void validate_probe_config(const ProbeConfig& config) {
  if (config.address.empty()) throw std::invalid_argument("probe: empty address");
  if (config.block_size_bytes == 0) throw std::invalid_argument("probe: block_size is 0");
  if (!(config.interval_s > 0.0)) throw std::invalid_argument("probe: interval_s <= 0");
  if (config.duration_s < 0) throw std::invalid_argument("probe: duration_s < 0");
  if (config.accept_timeout_s < 0.0) {
    throw std::invalid_argument("probe: accept_timeout_s < 0");
  }
}

RunSummary run_receiver(const ProbeConfig& config, const SampleSink& sink) {
  validate_probe_config(config);
  if (!sink) throw std::invalid_argument("probe: null sample sink");

  auto listener = net::listen_on(config.address);
  const auto accept_deadline =
      config.accept_timeout_s > 0.0
          ? std::optional(Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(
                                                 config.accept_timeout_s)))
          : std::nullopt;

  // One measured connection per run; clients that fail the handshake are
  // dropped and the listener keeps waiting.
  net::Socket conn;
  while (true) {
    auto accepted = net::accept_one(listener, accept_deadline);
    if (!accepted) {
      RunSummary summary;
      summary.error = "timed out waiting for a sender";
      return summary;
    }
    unsigned char hello[kHandshakeSize];
    bool ok = false;
    try {
      const auto hello_deadline = Clock::now() + std::chrono::seconds(5);
      std::size_t got = 0;
      while (got < sizeof(hello)) {
        auto n = accepted->recv_some(hello + got, sizeof(hello) - got, hello_deadline);
        if (!n || *n == 0) break;
        got += *n;
      }
      ok = got == sizeof(hello) && handshake_valid(hello);
    } catch (const std::exception&) {
      ok = false;
    }
    if (ok) {
      conn = std::move(*accepted);
      break;
    }
  }
  listener.close();

  const auto t0 = Clock::now();
  const std::int64_t t_base = config.epoch_time ? epoch_seconds_now() : 0;

  std::atomic<std::uint64_t> counter{0};
  std::mutex mu;
  std::condition_variable cv;
  bool done = false;
  std::string read_error;

  std::thread reader([&] {
    std::vector<char> buf(1 << 16);
    try {
      while (true) {
        const auto n = conn.recv_some(buf.data(), buf.size());
        if (*n == 0) break;
        counter.fetch_add(*n, std::memory_order_relaxed);
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      if (read_error.empty()) read_error = e.what();
    }
    {
      std::lock_guard lock(mu);
      done = true;
    }
    cv.notify_all();
  });

  RunSummary summary;
  const auto interval = std::chrono::duration<double>(config.interval_s);
  auto last_boundary = t0;
  bool stopped_by_sink = false;
  std::int64_t k = 0;

  {
    std::unique_lock lock(mu);
    while (!done) {
      const auto next = t0 + std::chrono::duration_cast<Clock::duration>(
                                 interval * static_cast<double>(k + 1));
      if (cv.wait_until(lock, next, [&] { return done; })) break;

      lock.unlock();
      const std::uint64_t bytes = counter.exchange(0, std::memory_order_relaxed);
      BandwidthSample sample;
      sample.t = t_base + k;
      sample.interval_bytes = bytes;
      sample.throughput_bps = static_cast<double>(bytes) * 8.0 / config.interval_s;
      sample.warmup = k < kWarmupSamples;
      sample.interval_seconds = config.interval_s;
      summary.total_bytes += bytes;
      ++summary.n_samples;
      ++k;
      last_boundary = next;
      const bool keep_going = sink(sample);
      const bool duration_reached =
          config.duration_s > 0 &&
          static_cast<double>(k) * config.interval_s >= static_cast<double>(config.duration_s);
      lock.lock();
      if (!keep_going || duration_reached) {
        stopped_by_sink = true;
        break;
      }
    }
  }

  // Wake the reader if the run ended from this side, then drain the residue
  // so the emitted samples account for every byte counted.
  conn.shutdown_both();
  reader.join();
  const auto t_end = Clock::now();

  // Bytes that raced in after the final boundary either become a trailing
  // partial sample or, when the run was cut short deliberately, fall outside
  // the run entirely. Either way total_bytes stays the sum of the samples.
  const std::uint64_t residual = counter.exchange(0, std::memory_order_relaxed);
  if (residual > 0 && !stopped_by_sink) {
    const double delta =
        std::max(std::chrono::duration<double>(t_end - last_boundary).count(),
                 kMinPartialSeconds);
    BandwidthSample sample;
    sample.t = t_base + k;
    sample.interval_bytes = residual;
    sample.throughput_bps = static_cast<double>(residual) * 8.0 / delta;
    sample.warmup = k < kWarmupSamples;
    sample.interval_seconds = delta;
    summary.total_bytes += residual;
    ++summary.n_samples;
    sink(sample);
  }

  summary.duration_s = std::chrono::duration<double>(t_end - t0).count();
  if (summary.duration_s > 0.0) {
    summary.mean_throughput_bps =
        static_cast<double>(summary.total_bytes) * 8.0 / summary.duration_s;
  }
  {
    std::lock_guard lock(mu);
    // A peer reset after data flowed still yields a usable run summary.
    if (!read_error.empty() && summary.total_bytes == 0) summary.error = read_error;
  }
  return summary;
}

RunSummary run_sender(const ProbeConfig& config) {
  validate_probe_config(config);
  RunSummary summary;

  net::Socket conn;
  try {
    conn = net::connect_to(config.address, std::chrono::milliseconds(2000));
  } catch (const std::exception& e) {
    summary.error = e.what();
    return summary;
  }

  const auto t0 = Clock::now();
  try {
    unsigned char hello[kHandshakeSize];
    std::memcpy(hello, kHandshakeMagic, sizeof(kHandshakeMagic));
    hello[4] = kProtocolVersion;
    hello[5] = kRoleSender;
    conn.send_all(hello, sizeof(hello));

    // Incompressible payload; refreshed per block so no two blocks repeat.
    std::mt19937_64 rng(config.payload_seed);
    std::vector<std::uint64_t> block((config.block_size_bytes + 7) / 8);
    const auto deadline =
        config.duration_s > 0
            ? std::optional(t0 + std::chrono::seconds(config.duration_s))
            : std::nullopt;

    while (!deadline || Clock::now() < *deadline) {
      for (auto& word : block) word = rng();
      conn.send_all(block.data(), config.block_size_bytes);
      summary.total_bytes += config.block_size_bytes;
    }
    conn.shutdown_send();
  } catch (const std::exception& e) {
    // The receiver tearing down the link is the normal end of an unbounded
    // run, not a failure.
    const std::string what = e.what();
    const bool peer_closed = what.find("Broken pipe") != std::string::npos ||
                             what.find("Connection reset") != std::string::npos;
    if (!(peer_closed && summary.total_bytes > 0)) summary.error = what;
  }

  summary.duration_s = std::chrono::duration<double>(Clock::now() - t0).count();
  if (summary.duration_s > 0.0) {
    summary.mean_throughput_bps =
        static_cast<double>(summary.total_bytes) * 8.0 / summary.duration_s;
  }
  return summary;
}

}  // namespace plc
