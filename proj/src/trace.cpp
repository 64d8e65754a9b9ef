#include "plc/trace.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace plc {

namespace {

constexpr const char* kCsvHeader = "t,interval_bytes,throughput_bps";

[[noreturn]] void fail_row(const std::string& path, std::size_t line_no, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

template <typename T>
bool parse_full(const std::string& s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

bool parse_full_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

}  // namespace

TraceFormat format_for_path(const std::string& path) {
  auto dot = path.rfind('.');
  if (dot != std::string::npos) {
    std::string ext = path.substr(dot);
    if (ext == ".jsonl" || ext == ".json") return TraceFormat::jsonl;
  }
  return TraceFormat::csv;
}

std::string format_decimal(double value) {
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
  std::string s(buf, res.ptr);
  if (s.find('.') == std::string::npos) s += ".0";
  return s;
}

void validate_samples(const std::vector<BandwidthSample>& samples) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    auto bad = [&](const std::string& what) {
      throw std::invalid_argument("sample " + std::to_string(i) + ": " + what);
    };
    if (!std::isfinite(s.throughput_bps) || s.throughput_bps < 0.0)
      bad("throughput_bps must be finite and non-negative");
    if (s.interval_seconds <= 0.0) bad("interval_seconds must be positive");
    if (i > 0 && s.t <= samples[i - 1].t) bad("timestamps must be strictly increasing");
    // One byte of slack: simulated traces back-compute bytes as
    // floor(throughput / 8).
    double expected_bits = static_cast<double>(s.interval_bytes) * 8.0;
    double carried_bits = s.throughput_bps * s.interval_seconds;
    if (std::abs(carried_bits - expected_bits) > 8.0 + 1e-9 * expected_bits)
      bad("throughput_bps inconsistent with interval_bytes");
  }
}

std::string trace_header(TraceFormat format) {
  if (format == TraceFormat::csv) return std::string(kCsvHeader) + "\n";
  return {};
}

std::string format_sample(const BandwidthSample& s, TraceFormat format) {
  std::string out;
  if (format == TraceFormat::csv) {
    out += std::to_string(s.t);
    out += ',';
    out += std::to_string(s.interval_bytes);
    out += ',';
    out += format_decimal(s.throughput_bps);
    out += '\n';
  } else {
    out += "{\"t\":";
    out += std::to_string(s.t);
    out += ",\"interval_bytes\":";
    out += std::to_string(s.interval_bytes);
    out += ",\"throughput_bps\":";
    out += format_decimal(s.throughput_bps);
    if (s.warmup) out += ",\"warmup\":true";
    out += "}\n";
  }
  return out;
}

std::string trace_to_string(const std::vector<BandwidthSample>& samples, TraceFormat format) {
  std::string out = trace_header(format);
  for (const auto& s : samples) out += format_sample(s, format);
  return out;
}

void write_trace(const std::vector<BandwidthSample>& samples, const std::string& path,
                 TraceFormat format) {
  validate_samples(samples);
  std::string body = trace_to_string(samples, format);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  f.flush();
  if (!f) throw std::runtime_error("write failed: " + path);
}

namespace {

Trace parse_csv(const std::string& content, const std::string& name) {
  Trace trace;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      if (line != kCsvHeader) fail_row(name, line_no, "expected header '" + std::string(kCsvHeader) + "'");
      saw_header = true;
      continue;
    }
    if (line.empty()) {
      if (in.eof()) break;
      fail_row(name, line_no, "empty row");
    }
    auto c1 = line.find(',');
    auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos ||
        line.find(',', c2 + 1) != std::string::npos)
      fail_row(name, line_no, "expected 3 comma-separated fields");
    BandwidthSample s;
    if (!parse_full(line.substr(0, c1), s.t)) fail_row(name, line_no, "bad t field");
    if (!parse_full(line.substr(c1 + 1, c2 - c1 - 1), s.interval_bytes))
      fail_row(name, line_no, "bad interval_bytes field");
    if (!parse_full_double(line.substr(c2 + 1), s.throughput_bps))
      fail_row(name, line_no, "bad throughput_bps field");
    if (!trace.samples.empty() && s.t <= trace.samples.back().t)
      fail_row(name, line_no, "non-monotonic timestamp");
    trace.samples.push_back(s);
  }
  if (!saw_header) fail_row(name, 1, "missing header");
  return trace;
}

Trace parse_jsonl(const std::string& content, const std::string& name) {
  Trace trace;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      if (in.eof()) break;
      fail_row(name, line_no, "empty row");
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail_row(name, line_no, std::string("bad json: ") + e.what());
    }
    if (!j.is_object()) fail_row(name, line_no, "row is not an object");
    BandwidthSample s;
    try {
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "t") s.t = it.value().get<std::int64_t>();
        else if (it.key() == "interval_bytes") s.interval_bytes = it.value().get<std::uint64_t>();
        else if (it.key() == "throughput_bps") s.throughput_bps = it.value().get<double>();
        else if (it.key() == "warmup") s.warmup = it.value().get<bool>();
        else fail_row(name, line_no, "unknown key '" + it.key() + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      fail_row(name, line_no, std::string("bad field type: ") + e.what());
    }
    if (!j.contains("t") || !j.contains("interval_bytes") || !j.contains("throughput_bps"))
      fail_row(name, line_no, "missing required key");
    if (!trace.samples.empty() && s.t <= trace.samples.back().t)
      fail_row(name, line_no, "non-monotonic timestamp");
    trace.samples.push_back(s);
  }
  return trace;
}

void flag_gaps(Trace& trace) {
  for (std::size_t i = 1; i < trace.samples.size(); ++i)
    if (trace.samples[i].t - trace.samples[i - 1].t > 1) trace.gap_indices.push_back(i);
}

}  // namespace

Trace parse_trace(const std::string& content) {
  std::size_t start = content.find_first_not_of(" \t\r\n");
  Trace trace;
  if (start != std::string::npos && content[start] == '{')
    trace = parse_jsonl(content, "<string>");
  else
    trace = parse_csv(content, "<string>");
  flag_gaps(trace);
  return trace;
}

Trace read_trace(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open trace file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  std::string content = buf.str();
  std::size_t start = content.find_first_not_of(" \t\r\n");
  Trace trace;
  if (start != std::string::npos && content[start] == '{')
    trace = parse_jsonl(content, path);
  else
    trace = parse_csv(content, path);
  flag_gaps(trace);
  return trace;
}

}  // namespace plc
