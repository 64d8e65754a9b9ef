#include "plc/proxy.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "net.hpp"
#include "plc/version.hpp"

namespace plc {

namespace {

using Clock = std::chrono::steady_clock;

// recv poll granularity; bounds how long teardown can lag the client EOF.
constexpr auto kRecvSlice = std::chrono::milliseconds(50);

}  // namespace

void validate_proxy_config(const ProxyConfig& config) {
  if (config.listen_address.empty()) throw std::invalid_argument("proxy: empty listen address");
  if (config.upstream_address.empty()) {
    throw std::invalid_argument("proxy: empty upstream address");
  }
  if (!(config.bucket_depth_s > 0.0)) throw std::invalid_argument("proxy: bucket_depth_s <= 0");
  if (config.chunk_bytes == 0) throw std::invalid_argument("proxy: chunk_bytes is 0");
  if (config.accept_timeout_s < 0.0) {
    throw std::invalid_argument("proxy: accept_timeout_s < 0");
  }
  if (config.socket_buffer_bytes < 0) {
    throw std::invalid_argument("proxy: socket_buffer_bytes < 0");
  }
}

ProxySummary run_throttle_proxy(const ProxyConfig& config, ChannelRealization& channel) {
  validate_proxy_config(config);

  auto listener = net::listen_on(config.listen_address);
  const auto accept_deadline =
      config.accept_timeout_s > 0.0
          ? std::optional(Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(
                                                 config.accept_timeout_s)))
          : std::nullopt;

  ProxySummary summary;
  auto accepted = net::accept_one(listener, accept_deadline);
  if (!accepted) {
    summary.error = "timed out waiting for a client";
    return summary;
  }
  net::Socket client = std::move(*accepted);
  listener.close();

  // Degradation is applied from the moment the measured connection exists.
  const auto t0 = Clock::now();

  net::Socket upstream = net::connect_to(config.upstream_address,
                                         std::chrono::milliseconds(2000));
  if (config.socket_buffer_bytes > 0) {
    net::clamp_buffers(client, config.socket_buffer_bytes);
    net::clamp_buffers(upstream, config.socket_buffer_bytes);
  }

  try {
    // Handshake passes unthrottled; it is control traffic, not payload.
    unsigned char hello[kHandshakeSize];
    if (!client.recv_exact(hello, sizeof(hello))) {
      summary.error = "client closed before handshake";
      return summary;
    }
    upstream.send_all(hello, sizeof(hello));
  } catch (const std::exception& e) {
    summary.error = e.what();
    return summary;
  }

  // The ticker owns the channel realization (lazy extension is not
  // thread-safe); the forwarding loop only reads the atomic rate.
  std::atomic<double> rate_Bps{channel.capacity_at(0) / 8.0};
  std::mutex mu;
  std::condition_variable cv;
  bool stop = false;
  std::thread ticker([&] {
    std::unique_lock lock(mu);
    for (std::int64_t k = 1; !stop; ++k) {
      const auto wake = t0 + std::chrono::seconds(k);
      if (cv.wait_until(lock, wake, [&] { return stop; })) break;
      lock.unlock();
      const double r = channel.capacity_at(k) / 8.0;
      rate_Bps.store(r, std::memory_order_relaxed);
      lock.lock();
    }
  });

  // Reverse direction carries no payload in this protocol, but a correct
  // proxy still relays it; EOF from upstream releases a stuck client read.
  std::thread back([&] {
    std::vector<char> buf(1 << 14);
    try {
      while (true) {
        const auto n = upstream.recv_some(buf.data(), buf.size());
        if (*n == 0) break;
        client.send_all(buf.data(), *n);
      }
    } catch (const std::exception&) {
    }
    client.shutdown_both();
  });

  std::vector<char> buf(config.chunk_bytes);
  double tokens = 0.0;
  auto last = Clock::now();
  try {
    while (true) {
      const auto now = Clock::now();
      const double rate = rate_Bps.load(std::memory_order_relaxed);
      const double dt = std::chrono::duration<double>(now - last).count();
      last = now;
      tokens = std::min(tokens + rate * dt, config.bucket_depth_s * rate);

      const auto budget = static_cast<std::size_t>(std::max(0.0, std::floor(tokens)));
      const std::size_t want = std::min(config.chunk_bytes, budget);
      if (want == 0) {
        // Starved: sleep until roughly one chunk accrues, capped for rate
        // changes to take hold quickly.
        const double need = static_cast<double>(std::min<std::size_t>(config.chunk_bytes, 1024));
        const double wait_s = rate > 0.0 ? need / rate : 0.01;
        std::this_thread::sleep_for(std::chrono::duration<double>(
            std::clamp(wait_s, 0.0002, 0.01)));
        continue;
      }

      const auto n = client.recv_some(buf.data(), want, Clock::now() + kRecvSlice);
      if (!n) continue;  // no payload this slice; tokens keep accruing to the cap
      if (*n == 0) break;
      upstream.send_all(buf.data(), *n);
      tokens -= static_cast<double>(*n);
      summary.forwarded_bytes += *n;
    }
  } catch (const std::exception& e) {
    // Either endpoint vanishing after payload flowed is the normal end of a
    // bounded run, not a proxy failure.
    const std::string what = e.what();
    const bool peer_gone = what.find("Broken pipe") != std::string::npos ||
                           what.find("Connection reset") != std::string::npos;
    if (!(peer_gone && summary.forwarded_bytes > 0)) summary.error = what;
  }

  // Half-close lets the receiver drain everything before seeing EOF.
  upstream.shutdown_send();
  {
    std::lock_guard lock(mu);
    stop = true;
  }
  cv.notify_all();
  ticker.join();
  back.join();

  summary.duration_s = std::chrono::duration<double>(Clock::now() - t0).count();
  return summary;
}

}  // namespace plc
