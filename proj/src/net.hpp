#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

namespace plc::net {

/// Splits "host:port" (host may be empty, meaning all interfaces for listen
/// and loopback for connect). Throws on a missing or non-numeric port.
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

/// Owning socket descriptor. Move-only.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();

  /// Sends the whole buffer; throws on error or peer reset.
  void send_all(const void* data, std::size_t size);

  /// Reads up to size bytes. Returns 0 on orderly shutdown. With a deadline,
  /// returns nullopt when it passes before any data arrives.
  std::optional<std::size_t> recv_some(
      void* data, std::size_t size,
      std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt);

  /// Reads exactly size bytes; false on EOF before the first byte, throws on
  /// EOF mid-buffer or error.
  bool recv_exact(void* data, std::size_t size);

  /// Half-close for writing; the peer sees EOF after draining.
  void shutdown_send();

  /// Full shutdown; wakes a thread blocked in recv on this socket.
  void shutdown_both();

 private:
  int fd_ = -1;
};

/// Bound, listening TCP socket (IPv4, SO_REUSEADDR).
Socket listen_on(const std::string& address, int backlog = 1);

/// Returns the locally bound port (for ":0" listens).
std::uint16_t local_port(const Socket& socket);

/// Blocks for one connection; nullopt when the deadline passes first.
std::optional<Socket> accept_one(
    Socket& listener,
    std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt);

/// Connects with an optional timeout; throws on failure.
Socket connect_to(const std::string& address,
                  std::optional<std::chrono::milliseconds> timeout = std::nullopt);

/// Caps SO_SNDBUF/SO_RCVBUF so that in-flight data stays small relative to
/// per-second accounting. Best effort.
void clamp_buffers(Socket& socket, int bytes);

}  // namespace plc::net
