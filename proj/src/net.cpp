#include "net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <stdexcept>

namespace plc::net {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

// Remaining time in ms for poll(); 0 when expired, -1 for no deadline.
int poll_timeout(std::optional<std::chrono::steady_clock::time_point> deadline) {
  if (!deadline) return -1;
  const auto now = std::chrono::steady_clock::now();
  if (*deadline <= now) return 0;
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - now).count();
  return static_cast<int>(std::min<long long>(ms + 1, 1 << 30));
}

// Resolves an IPv4 sockaddr; empty host means loopback or wildcard.
sockaddr_in make_sockaddr(const std::string& host, std::uint16_t port, bool for_listen) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty()) {
    addr.sin_addr.s_addr = htonl(for_listen ? INADDR_ANY : INADDR_LOOPBACK);
    return addr;
  }
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const int rc = getaddrinfo(host.c_str(), nullptr, &hints, &result);
  if (rc != 0 || result == nullptr) {
    throw std::runtime_error("cannot resolve host \"" + host + "\"");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(result->ai_addr)->sin_addr;
  freeaddrinfo(result);
  return addr;
}

}  // namespace

std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) {
    throw std::runtime_error("address \"" + address + "\": expected host:port");
  }
  const std::string host = address.substr(0, colon);
  const std::string port_str = address.substr(colon + 1);
  unsigned port = 0;
  const auto [ptr, ec] =
      std::from_chars(port_str.data(), port_str.data() + port_str.size(), port);
  if (ec != std::errc() || ptr != port_str.data() + port_str.size() || port > 65535) {
    throw std::runtime_error("address \"" + address + "\": bad port");
  }
  return {host, static_cast<std::uint16_t>(port)};
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::send_all(const void* data, std::size_t size) {
  const char* p = static_cast<const char*>(data);
  std::size_t sent = 0;
  while (sent < size) {
    const ssize_t n = ::send(fd_, p + sent, size - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::size_t> Socket::recv_some(
    void* data, std::size_t size,
    std::optional<std::chrono::steady_clock::time_point> deadline) {
  while (true) {
    if (deadline) {
      pollfd pfd{fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, poll_timeout(deadline));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw_errno("poll");
      }
      if (rc == 0) return std::nullopt;
    }
    const ssize_t n = ::recv(fd_, data, size, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("recv");
    }
    return static_cast<std::size_t>(n);
  }
}

bool Socket::recv_exact(void* data, std::size_t size) {
  char* p = static_cast<char*>(data);
  std::size_t got = 0;
  while (got < size) {
    // No deadline, so recv_some always yields a count.
    const auto n = recv_some(p + got, size - got);
    if (*n == 0) {
      if (got == 0) return false;
      throw std::runtime_error("connection closed mid-message");
    }
    got += *n;
  }
  return true;
}

void Socket::shutdown_send() { ::shutdown(fd_, SHUT_WR); }

void Socket::shutdown_both() { ::shutdown(fd_, SHUT_RDWR); }

Socket listen_on(const std::string& address, int backlog) {
  const auto [host, port] = parse_address(address);
  Socket sock(::socket(AF_INET, SOCK_STREAM, 0));
  if (!sock.valid()) throw_errno("socket");
  const int one = 1;
  ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_sockaddr(host, port, true);
  if (::bind(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw_errno("bind " + address);
  }
  if (::listen(sock.fd(), backlog) != 0) throw_errno("listen " + address);
  return sock;
}

std::uint16_t local_port(const Socket& socket) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw_errno("getsockname");
  }
  return ntohs(addr.sin_port);
}

std::optional<Socket> accept_one(
    Socket& listener, std::optional<std::chrono::steady_clock::time_point> deadline) {
  while (true) {
    pollfd pfd{listener.fd(), POLLIN, 0};
    const int rc = ::poll(&pfd, 1, poll_timeout(deadline));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw_errno("poll");
    }
    if (rc == 0) return std::nullopt;
    const int fd = ::accept(listener.fd(), nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      throw_errno("accept");
    }
    return Socket(fd);
  }
}

Socket connect_to(const std::string& address,
                  std::optional<std::chrono::milliseconds> timeout) {
  const auto [host, port] = parse_address(address);
  sockaddr_in addr = make_sockaddr(host, port, false);
  const auto deadline =
      timeout ? std::optional(std::chrono::steady_clock::now() + *timeout) : std::nullopt;
  while (true) {
    Socket sock(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock.valid()) throw_errno("socket");
    if (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      return sock;
    }
    if (errno == EINTR) continue;
    // Refused connections retry until the deadline so a freshly spawned
    // listener has time to bind.
    if (errno == ECONNREFUSED && deadline &&
        std::chrono::steady_clock::now() < *deadline) {
      struct timespec ts{0, 20'000'000};
      ::nanosleep(&ts, nullptr);
      continue;
    }
    throw_errno("connect " + address);
  }
}

void clamp_buffers(Socket& socket, int bytes) {
  ::setsockopt(socket.fd(), SOL_SOCKET, SO_SNDBUF, &bytes, sizeof(bytes));
  ::setsockopt(socket.fd(), SOL_SOCKET, SO_RCVBUF, &bytes, sizeof(bytes));
}

}  // namespace plc::net
