#pragma once

// Telemetry sample compression: per-field delta, zigzag, varint. Columns are
// stored back to back (all bandwidth deltas, then compute, then dram); the
// decoder only needs the sample count from the log header. Deltas of a steady
// counter are zeros, which cost one byte each, so quiet telemetry compresses
// close to 3 bytes per 8-byte sample.

#include <cstdint>
#include <string>
#include <vector>

#include "agora/error.hpp"

namespace agora::billing {

struct TelemetrySample {
  std::uint32_t bw_mbps = 0;
  std::uint16_t compute_util = 0;  // 0..65535 maps 0..1
  std::uint16_t dram_util = 0;

  bool operator==(const TelemetrySample&) const = default;
};

inline std::uint64_t zigzag_encode(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^
         static_cast<std::uint64_t>(v >> 63);
}

inline std::int64_t zigzag_decode(std::uint64_t v) {
  return static_cast<std::int64_t>(v >> 1) ^
         -static_cast<std::int64_t>(v & 1);
}

inline void varint_append(std::string& out, std::uint64_t v) {
  while (v & ~0x7fULL) {
    out.push_back(static_cast<char>((v & 0x7f) | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<char>(v));
}

inline std::uint64_t varint_read(const std::string& in, size_t& pos) {
  std::uint64_t v = 0;
  int shift = 0;
  while (true) {
    if (pos >= in.size()) fail(ErrorCode::Truncated, "varint past end");
    const auto byte = static_cast<unsigned char>(in[pos++]);
    v |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
    if ((byte & 0x80) == 0) break;
    shift += 7;
    if (shift > 63) fail(ErrorCode::Malformed, "varint overflow");
  }
  return v;
}

inline std::string compress_samples(const std::vector<TelemetrySample>& samples) {
  std::string out;
  out.reserve(samples.size() * 3 + 16);
  std::int64_t prev = 0;
  for (const auto& s : samples) {
    varint_append(out, zigzag_encode(static_cast<std::int64_t>(s.bw_mbps) - prev));
    prev = static_cast<std::int64_t>(s.bw_mbps);
  }
  prev = 0;
  for (const auto& s : samples) {
    varint_append(out, zigzag_encode(static_cast<std::int64_t>(s.compute_util) - prev));
    prev = static_cast<std::int64_t>(s.compute_util);
  }
  prev = 0;
  for (const auto& s : samples) {
    varint_append(out, zigzag_encode(static_cast<std::int64_t>(s.dram_util) - prev));
    prev = static_cast<std::int64_t>(s.dram_util);
  }
  return out;
}

inline std::vector<TelemetrySample> decompress_samples(const std::string& in,
                                                       std::uint32_t count) {
  std::vector<TelemetrySample> samples(count);
  size_t pos = 0;
  std::int64_t val = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    val += zigzag_decode(varint_read(in, pos));
    if (val < 0 || val > 0xffffffffLL) fail(ErrorCode::Malformed, "bw out of range");
    samples[i].bw_mbps = static_cast<std::uint32_t>(val);
  }
  val = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    val += zigzag_decode(varint_read(in, pos));
    if (val < 0 || val > 0xffffLL) fail(ErrorCode::Malformed, "util out of range");
    samples[i].compute_util = static_cast<std::uint16_t>(val);
  }
  val = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    val += zigzag_decode(varint_read(in, pos));
    if (val < 0 || val > 0xffffLL) fail(ErrorCode::Malformed, "util out of range");
    samples[i].dram_util = static_cast<std::uint16_t>(val);
  }
  if (pos != in.size()) fail(ErrorCode::Malformed, "trailing bytes after body");
  return samples;
}

}  // namespace agora::billing
