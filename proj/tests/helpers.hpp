#pragma once

// Shared scaffolding for the unit and acceptance tests: synthetic traces,
// free-port discovery for the loopback runs, a temp-dir RAII, and a tiny
// subprocess runner for CLI tests.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "plc/trace.hpp"

namespace testutil {

inline plc::Trace make_trace(const std::vector<double>& throughputs_bps) {
  plc::Trace trace;
  trace.samples.reserve(throughputs_bps.size());
  for (std::size_t i = 0; i < throughputs_bps.size(); ++i) {
    plc::BandwidthSample s;
    s.t = static_cast<std::int64_t>(i);
    s.throughput_bps = throughputs_bps[i];
    s.interval_bytes = static_cast<std::uint64_t>(throughputs_bps[i] / 8.0);
    trace.samples.push_back(s);
  }
  return trace;
}

inline plc::Trace flat_trace(std::size_t n, double level_bps) {
  return make_trace(std::vector<double>(n, level_bps));
}

/// Overwrites [t0, t1) with level * (1 - frac).
inline void apply_drop(plc::Trace& trace, std::int64_t t0, std::int64_t t1, double frac) {
  for (auto& s : trace.samples) {
    if (s.t >= t0 && s.t < t1) {
      s.throughput_bps *= (1.0 - frac);
      s.interval_bytes = static_cast<std::uint64_t>(s.throughput_bps / 8.0);
    }
  }
}

/// Binds port 0 to discover a free TCP port. The listener closes before the
/// port is reused, which is racy in general but reliable in a sandbox.
inline int free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw std::runtime_error("bind failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  int port = ntohs(addr.sin_port);
  ::close(fd);
  return port;
}

class TempDir {
 public:
  TempDir() {
    char tmpl[] = "/tmp/plctest.XXXXXX";
    if (!mkdtemp(tmpl)) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::string cmd = "rm -rf '" + path_ + "'";
    [[maybe_unused]] int rc = std::system(cmd.c_str());
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << f.rdbuf();
  return buffer.str();
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs `argv_line` through the shell with stdout/stderr captured.
inline CommandResult run_command(const std::string& argv_line, const TempDir& dir) {
  const std::string out_path = dir.file("_stdout");
  const std::string err_path = dir.file("_stderr");
  const std::string full = argv_line + " >'" + out_path + "' 2>'" + err_path + "'";
  const int status = std::system(full.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  return result;
}

}  // namespace testutil
