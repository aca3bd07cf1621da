#pragma once

// Transport framing between node and collector (all big-endian):
//   magic 0x41474F52 "AGOR" | version u8 | customer_id u64 | rental_id u64 |
//   node_id u32 | gpu_id u8 | log_seq u64 | payload_len u32 | payload
//
// The payload the node sends is an 8-byte send-timestamp preamble (us, in the
// clear, for ingestion-latency measurement) followed by the sealed log. The
// charge itself only ever travels inside the encrypted payload; the frame
// carries routing ids alone.
//
// Acks are 20 bytes: magic "AACK" | node_id u32 | gpu_id u8 | log_seq u64 |
// status u8 | 2 bytes padding.

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "agora/billing.hpp"
#include "agora/error.hpp"

namespace agora::billing {

constexpr std::uint32_t kFrameMagic = 0x41474f52;  // "AGOR"
constexpr std::uint8_t kFrameVersion = 1;
constexpr size_t kFrameHeaderBytes = 4 + 1 + 8 + 8 + 4 + 1 + 8 + 4;
constexpr std::uint32_t kMaxPayloadBytes = 16 * 1024 * 1024;
constexpr size_t kSendTsPreambleBytes = 8;

constexpr char kAckMagic[4] = {'A', 'A', 'C', 'K'};
constexpr size_t kAckBytes = 20;

enum class AckStatus : std::uint8_t {
  Ok = 0,
  AuthFailure = 1,
  UnknownCustomer = 2,
  Malformed = 3,
};

struct WireFrame {
  std::uint64_t customer_id = 0;
  std::uint64_t rental_id = 0;
  std::uint32_t node_id = 0;
  std::uint8_t gpu_id = 0;
  std::uint64_t log_seq = 0;
  std::string payload;

  bool operator==(const WireFrame&) const = default;
};

inline std::string encode_frame(const WireFrame& f) {
  if (f.payload.size() > kMaxPayloadBytes) {
    fail(ErrorCode::Oversize, "payload exceeds 16 MiB");
  }
  std::string out;
  out.reserve(kFrameHeaderBytes + f.payload.size());
  detail::put_u32_be(out, kFrameMagic);
  out.push_back(static_cast<char>(kFrameVersion));
  detail::put_u64_be(out, f.customer_id);
  detail::put_u64_be(out, f.rental_id);
  detail::put_u32_be(out, f.node_id);
  out.push_back(static_cast<char>(f.gpu_id));
  detail::put_u64_be(out, f.log_seq);
  detail::put_u32_be(out, static_cast<std::uint32_t>(f.payload.size()));
  out += f.payload;
  return out;
}

// Decodes one frame starting at `pos`; advances `pos` past it. Throws
// Truncated when the buffer holds only a prefix (callers reading from a
// stream catch that and wait for more bytes).
inline WireFrame decode_frame(const std::string& bytes, size_t& pos) {
  if (bytes.size() - pos < kFrameHeaderBytes) {
    fail(ErrorCode::Truncated, "incomplete frame header");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
  if (detail::get_u32_be(p) != kFrameMagic) {
    fail(ErrorCode::BadMagic, "bad frame magic");
  }
  if (p[4] != kFrameVersion) fail(ErrorCode::BadVersion, "bad frame version");
  WireFrame f;
  size_t off = 5;
  f.customer_id = detail::get_u64_be(p + off); off += 8;
  f.rental_id = detail::get_u64_be(p + off); off += 8;
  f.node_id = detail::get_u32_be(p + off); off += 4;
  f.gpu_id = p[off]; off += 1;
  f.log_seq = detail::get_u64_be(p + off); off += 8;
  const std::uint32_t payload_len = detail::get_u32_be(p + off); off += 4;
  if (payload_len > kMaxPayloadBytes) fail(ErrorCode::Oversize, "payload length");
  if (bytes.size() - pos - off < payload_len) {
    fail(ErrorCode::Truncated, "declared payload length exceeds buffer");
  }
  f.payload = bytes.substr(pos + off, payload_len);
  pos += off + payload_len;
  return f;
}

inline WireFrame decode_frame(const std::string& bytes) {
  size_t pos = 0;
  WireFrame f = decode_frame(bytes, pos);
  if (pos != bytes.size()) fail(ErrorCode::Malformed, "trailing bytes after frame");
  return f;
}

inline std::vector<WireFrame> decode_frames(const std::string& bytes) {
  std::vector<WireFrame> out;
  size_t pos = 0;
  while (pos < bytes.size()) out.push_back(decode_frame(bytes, pos));
  return out;
}

struct Ack {
  std::uint32_t node_id = 0;
  std::uint8_t gpu_id = 0;
  std::uint64_t log_seq = 0;
  AckStatus status = AckStatus::Ok;

  bool operator==(const Ack&) const = default;
};

inline std::string encode_ack(const Ack& a) {
  std::string out;
  out.reserve(kAckBytes);
  out.append(kAckMagic, 4);
  detail::put_u32_be(out, a.node_id);
  out.push_back(static_cast<char>(a.gpu_id));
  detail::put_u64_be(out, a.log_seq);
  out.push_back(static_cast<char>(a.status));
  out.append(2, '\0');
  return out;
}

inline Ack decode_ack(const std::string& bytes) {
  if (bytes.size() < kAckBytes) fail(ErrorCode::Truncated, "short ack");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, kAckMagic, 4) != 0) fail(ErrorCode::BadMagic, "bad ack magic");
  Ack a;
  a.node_id = detail::get_u32_be(p + 4);
  a.gpu_id = p[8];
  a.log_seq = detail::get_u64_be(p + 9);
  a.status = static_cast<AckStatus>(p[17]);
  return a;
}

// Payload helpers: send-timestamp preamble in the clear, sealed log after.
inline std::string make_frame_payload(std::uint64_t send_ts_us,
                                      const SealedLog& sealed) {
  std::string out;
  detail::put_u64_be(out, send_ts_us);
  out += sealed.to_bytes();
  return out;
}

inline std::pair<std::uint64_t, SealedLog> split_frame_payload(
    const std::string& payload) {
  if (payload.size() < kSendTsPreambleBytes) {
    fail(ErrorCode::Truncated, "payload shorter than send-ts preamble");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  const std::uint64_t send_ts = detail::get_u64_be(p);
  return {send_ts, SealedLog::from_bytes(payload.substr(kSendTsPreambleBytes))};
}

}  // namespace agora::billing
