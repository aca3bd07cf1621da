#pragma once

// Utilization traces: the step function BW(t) a job exercises on a GPU,
// stored as ordered (duration, bandwidth, utilization) records.
//
// Two file formats:
//   CSV    header `duration_us,bw_tbps,compute_util,dram_util,label`
//   binary 24-byte preamble (magic "ATRC", version, record count, fixed
//          period us, gpu name) then little-endian 8-byte records of
//          u32 bw MB/s, u16 compute util, u16 dram util.
// The binary records are the same 8-byte shape the metering path samples.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agora/error.hpp"
#include "agora/pricing.hpp"

namespace agora::workload {

struct UtilizationRecord {
  double duration_us = 0.0;
  double bw_tbps = 0.0;
  double compute_util = 0.0;  // 0..1
  double dram_util = 0.0;     // 0..1
  std::string label;

  bool operator==(const UtilizationRecord&) const = default;
};

struct Trace {
  std::string gpu;
  std::vector<UtilizationRecord> records;
  std::optional<std::uint64_t> token_count;

  double total_duration_us() const {
    double t = 0.0;
    for (const auto& r : records) t += r.duration_us;
    return t;
  }
  double total_duration_hours() const {
    return total_duration_us() / 3.6e9;
  }

  bool operator==(const Trace&) const = default;
};

struct TraceStats {
  double total_duration_us = 0.0;
  double mean_bw_tbps = 0.0;  // time-weighted
  double peak_bw_tbps = 0.0;
};

inline void validate_record(const UtilizationRecord& r, size_t index) {
  if (!(r.duration_us > 0)) {
    fail(ErrorCode::Malformed,
         "record " + std::to_string(index) + ": duration must be positive");
  }
  if (r.bw_tbps < 0 || r.compute_util < 0 || r.compute_util > 1 ||
      r.dram_util < 0 || r.dram_util > 1) {
    fail(ErrorCode::Malformed,
         "record " + std::to_string(index) + ": value out of range");
  }
}

inline void validate_against_gpu(const Trace& t, const pricing::GpuModel& gpu) {
  const double limit = gpu.bw_max_tbps * (1.0 + pricing::kBwRelTol);
  for (size_t i = 0; i < t.records.size(); ++i) {
    if (t.records[i].bw_tbps > limit) {
      fail(ErrorCode::BwExceedsGpu,
           "record " + std::to_string(i) + " uses " +
               std::to_string(t.records[i].bw_tbps) + " TB/s > '" + gpu.name +
               "' peak " + std::to_string(gpu.bw_max_tbps));
    }
  }
}

inline TraceStats trace_stats(const Trace& t) {
  if (t.records.empty()) fail(ErrorCode::EmptyTrace, "trace has no records");
  TraceStats s;
  double bw_time = 0.0;
  for (const auto& r : t.records) {
    s.total_duration_us += r.duration_us;
    bw_time += r.bw_tbps * r.duration_us;
    s.peak_bw_tbps = std::max(s.peak_bw_tbps, r.bw_tbps);
  }
  s.mean_bw_tbps = bw_time / s.total_duration_us;
  return s;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceCsvHeader =
    "duration_us,bw_tbps,compute_util,dram_util,label";

namespace detail {

inline double parse_double_field(const std::string& field, size_t line_no,
                                 const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::Malformed, "line " + std::to_string(line_no) + ": bad " +
                                   std::string(what) + " '" + field + "'");
  }
}

// shortest representation that parses back to the same double
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace detail

inline Trace parse_trace_csv(const std::string& text,
                             const pricing::GpuModel& gpu) {
  Trace t;
  t.gpu = gpu.name;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kTraceCsvHeader) {
        fail(ErrorCode::Malformed,
             "line 1: expected header '" + std::string(kTraceCsvHeader) + "'");
      }
      saw_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (fields.size() < 4 || fields.size() > 5) {
      fail(ErrorCode::Malformed,
           "line " + std::to_string(line_no) + ": expected 4 or 5 fields");
    }
    UtilizationRecord r;
    r.duration_us = detail::parse_double_field(fields[0], line_no, "duration");
    r.bw_tbps = detail::parse_double_field(fields[1], line_no, "bandwidth");
    r.compute_util = detail::parse_double_field(fields[2], line_no, "compute_util");
    r.dram_util = detail::parse_double_field(fields[3], line_no, "dram_util");
    if (fields.size() == 5) r.label = fields[4];
    validate_record(r, t.records.size());
    t.records.push_back(std::move(r));
  }
  if (!saw_header) fail(ErrorCode::EmptyTrace, "no header");
  if (t.records.empty()) fail(ErrorCode::EmptyTrace, "no records");
  validate_against_gpu(t, gpu);
  return t;
}

inline std::string serialize_trace_csv(const Trace& t) {
  std::ostringstream out;
  out << kTraceCsvHeader << "\n";
  for (const auto& r : t.records) {
    out << detail::format_double(r.duration_us) << ','
        << detail::format_double(r.bw_tbps) << ','
        << detail::format_double(r.compute_util) << ','
        << detail::format_double(r.dram_util) << ',' << r.label << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Binary samples (fixed-period telemetry dumps)
// ---------------------------------------------------------------------------

constexpr char kTraceMagic[4] = {'A', 'T', 'R', 'C'};
constexpr std::uint8_t kTraceVersion = 1;
constexpr size_t kTracePreambleBytes = 24;
constexpr size_t kTraceNameBytes = 10;

inline std::uint32_t bw_to_mbps(double bw_tbps) {
  const double v = bw_tbps * 1e6;
  if (v < 0) return 0;
  if (v > 4294967295.0) return 4294967295u;
  return static_cast<std::uint32_t>(std::llround(v));
}
inline double mbps_to_tbps(std::uint32_t mbps) {
  return static_cast<double>(mbps) * 1e-6;
}
inline std::uint16_t util_to_u16(double frac) {
  const double v = frac * 65535.0;
  if (v < 0) return 0;
  if (v > 65535.0) return 65535;
  return static_cast<std::uint16_t>(std::llround(v));
}
inline double u16_to_util(std::uint16_t q) {
  return static_cast<double>(q) / 65535.0;
}

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16_le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t get_u16_le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// Requires a fixed-period trace: every record duration equals `period_us`.
inline std::string serialize_trace_binary(const Trace& t,
                                          std::uint32_t period_us) {
  if (t.records.empty()) fail(ErrorCode::EmptyTrace, "no records");
  if (t.gpu.size() > kTraceNameBytes) {
    fail(ErrorCode::BadArgs, "gpu name longer than 10 bytes");
  }
  for (size_t i = 0; i < t.records.size(); ++i) {
    if (t.records[i].duration_us != static_cast<double>(period_us)) {
      fail(ErrorCode::BadArgs, "record " + std::to_string(i) +
                                   " duration differs from fixed period");
    }
  }
  std::string out;
  out.reserve(kTracePreambleBytes + 8 * t.records.size());
  out.append(kTraceMagic, 4);
  out.push_back(static_cast<char>(kTraceVersion));
  detail::put_u32_le(out, static_cast<std::uint32_t>(t.records.size()));
  detail::put_u32_le(out, period_us);
  out.push_back(static_cast<char>(t.gpu.size()));
  out.append(t.gpu);
  out.append(kTraceNameBytes - t.gpu.size(), '\0');
  for (const auto& r : t.records) {
    detail::put_u32_le(out, bw_to_mbps(r.bw_tbps));
    detail::put_u16_le(out, util_to_u16(r.compute_util));
    detail::put_u16_le(out, util_to_u16(r.dram_util));
  }
  return out;
}

inline Trace parse_trace_binary(const std::string& bytes,
                                const pricing::GpuCatalog& catalog) {
  if (bytes.size() < kTracePreambleBytes) {
    fail(ErrorCode::Malformed, "offset 0: short preamble");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, kTraceMagic, 4) != 0) {
    fail(ErrorCode::Malformed, "offset 0: bad magic");
  }
  if (p[4] != kTraceVersion) {
    fail(ErrorCode::Malformed, "offset 4: unsupported version");
  }
  const std::uint32_t count = detail::get_u32_le(p + 5);
  const std::uint32_t period_us = detail::get_u32_le(p + 9);
  const std::uint8_t name_len = p[13];
  if (name_len > kTraceNameBytes) {
    fail(ErrorCode::Malformed, "offset 13: gpu name length > 10");
  }
  if (period_us == 0) fail(ErrorCode::Malformed, "offset 9: zero period");
  Trace t;
  t.gpu.assign(reinterpret_cast<const char*>(p + 14), name_len);
  if (bytes.size() != kTracePreambleBytes + 8ull * count) {
    fail(ErrorCode::Malformed,
         "offset " + std::to_string(bytes.size()) + ": expected " +
             std::to_string(kTracePreambleBytes + 8ull * count) + " bytes");
  }
  if (count == 0) fail(ErrorCode::EmptyTrace, "no records");
  t.records.reserve(count);
  const unsigned char* rec = p + kTracePreambleBytes;
  for (std::uint32_t i = 0; i < count; ++i, rec += 8) {
    UtilizationRecord r;
    r.duration_us = static_cast<double>(period_us);
    r.bw_tbps = mbps_to_tbps(detail::get_u32_le(rec));
    r.compute_util = u16_to_util(detail::get_u16_le(rec + 4));
    r.dram_util = u16_to_util(detail::get_u16_le(rec + 6));
    t.records.push_back(std::move(r));
  }
  validate_against_gpu(t, catalog.by_name(t.gpu));
  return t;
}

}  // namespace agora::workload
