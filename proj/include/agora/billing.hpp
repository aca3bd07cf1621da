#pragma once

// The sealed billing log: a fixed-width big-endian header carrying the
// accumulated charge, followed by the compressed telemetry series, the whole
// blob encrypted per customer. The charge is integer nanodollars accumulated
// sample by sample, so header.amount is exactly the sum of the increments the
// sampler applied; nothing in this module touches floating point.
//
// Plaintext layout (all big-endian):
//   magic "ALOG" | version u8 | amount i64 | date u64 | customer_id u64 |
//   rental_id u64 | node_id u32 | gpu_id u8 | log_seq u64 | period u32 |
//   start_ts u64 | sample_count u32 | compressed body ...
//
// Sealed layout: nonce (12) | ciphertext | gcm tag (16). The nonce is
// log_seq || gpu_id || 3 random bytes.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "agora/codec.hpp"
#include "agora/crypto.hpp"
#include "agora/error.hpp"
#include "agora/money.hpp"

namespace agora::billing {

constexpr char kLogMagic[4] = {'A', 'L', 'O', 'G'};
constexpr std::uint8_t kLogVersion = 1;
constexpr size_t kLogHeaderBytes = 4 + 1 + 8 + 8 + 8 + 8 + 4 + 1 + 8 + 4 + 8 + 4;
constexpr std::uint32_t kDefaultMaxSamples = 65536;

struct LogHeader {
  Nanodollars amount = 0;
  std::uint64_t date_us = 0;  // log open time, us since epoch
  std::uint64_t customer_id = 0;
  std::uint64_t rental_id = 0;
  std::uint32_t node_id = 0;
  std::uint8_t gpu_id = 0;
  std::uint64_t log_seq = 0;
  std::uint32_t period_us = 0;
  std::uint64_t start_ts_us = 0;
  std::uint32_t sample_count = 0;

  bool operator==(const LogHeader&) const = default;
};

struct SealedLog {
  Nonce nonce{};
  std::string ciphertext;  // includes the 16-byte tag

  std::string to_bytes() const {
    std::string out(reinterpret_cast<const char*>(nonce.data()), kNonceBytes);
    out += ciphertext;
    return out;
  }

  static SealedLog from_bytes(const std::string& bytes) {
    if (bytes.size() < kNonceBytes + kTagBytes) {
      fail(ErrorCode::Truncated, "sealed log too short");
    }
    SealedLog s;
    std::memcpy(s.nonce.data(), bytes.data(), kNonceBytes);
    s.ciphertext = bytes.substr(kNonceBytes);
    return s;
  }
};

namespace detail {

inline void put_u64_be(std::string& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u32_be(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint64_t get_u64_be(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}
inline std::uint32_t get_u32_be(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

inline std::string serialize_log_plaintext(
    const LogHeader& h, const std::vector<TelemetrySample>& samples) {
  std::string out;
  out.reserve(kLogHeaderBytes + samples.size() * 3);
  out.append(kLogMagic, 4);
  out.push_back(static_cast<char>(kLogVersion));
  detail::put_u64_be(out, static_cast<std::uint64_t>(h.amount));
  detail::put_u64_be(out, h.date_us);
  detail::put_u64_be(out, h.customer_id);
  detail::put_u64_be(out, h.rental_id);
  detail::put_u32_be(out, h.node_id);
  out.push_back(static_cast<char>(h.gpu_id));
  detail::put_u64_be(out, h.log_seq);
  detail::put_u32_be(out, h.period_us);
  detail::put_u64_be(out, h.start_ts_us);
  detail::put_u32_be(out, h.sample_count);
  out += compress_samples(samples);
  return out;
}

inline std::pair<LogHeader, std::vector<TelemetrySample>> parse_log_plaintext(
    const std::string& bytes) {
  if (bytes.size() < kLogHeaderBytes) {
    fail(ErrorCode::Truncated, "log plaintext shorter than header");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, kLogMagic, 4) != 0) fail(ErrorCode::BadMagic, "not a log");
  if (p[4] != kLogVersion) fail(ErrorCode::BadVersion, "unsupported log version");
  LogHeader h;
  size_t off = 5;
  h.amount = static_cast<Nanodollars>(detail::get_u64_be(p + off)); off += 8;
  h.date_us = detail::get_u64_be(p + off); off += 8;
  h.customer_id = detail::get_u64_be(p + off); off += 8;
  h.rental_id = detail::get_u64_be(p + off); off += 8;
  h.node_id = detail::get_u32_be(p + off); off += 4;
  h.gpu_id = p[off]; off += 1;
  h.log_seq = detail::get_u64_be(p + off); off += 8;
  h.period_us = detail::get_u32_be(p + off); off += 4;
  h.start_ts_us = detail::get_u64_be(p + off); off += 8;
  h.sample_count = detail::get_u32_be(p + off); off += 4;
  auto samples = decompress_samples(bytes.substr(off), h.sample_count);
  return {h, std::move(samples)};
}

class LogBuilder {
 public:
  LogBuilder(std::uint64_t customer_id, std::uint64_t rental_id,
             std::uint32_t node_id, std::uint8_t gpu_id, std::uint64_t log_seq,
             std::uint32_t period_us, std::uint64_t start_ts_us) {
    if (period_us == 0) fail(ErrorCode::BadArgs, "period must be > 0");
    header_.customer_id = customer_id;
    header_.rental_id = rental_id;
    header_.node_id = node_id;
    header_.gpu_id = gpu_id;
    header_.log_seq = log_seq;
    header_.period_us = period_us;
    header_.start_ts_us = start_ts_us;
    header_.date_us = start_ts_us;
  }

  void append_sample(const TelemetrySample& sample, Nanodollars increment) {
    if (sealed_) fail(ErrorCode::Sealed, "log already sealed");
    header_.amount += increment;
    header_.sample_count += 1;
    samples_.push_back(sample);
  }

  const LogHeader& header() const { return header_; }
  const std::vector<TelemetrySample>& samples() const { return samples_; }
  std::uint32_t sample_count() const { return header_.sample_count; }
  bool sealed() const { return sealed_; }

  std::string serialize_plaintext() const {
    return serialize_log_plaintext(header_, samples_);
  }

  SealedLog seal(const AeadKey& key,
                 std::uint32_t max_samples = kDefaultMaxSamples) {
    if (sealed_) fail(ErrorCode::Sealed, "log already sealed");
    if (header_.sample_count > max_samples) {
      fail(ErrorCode::BadArgs, "sample count exceeds max_samples");
    }
    sealed_ = true;
    SealedLog out;
    out.nonce = make_nonce(header_.log_seq, header_.gpu_id);
    out.ciphertext = aead_seal(key, out.nonce, serialize_plaintext());
    return out;
  }

  static Nonce make_nonce(std::uint64_t log_seq, std::uint8_t gpu_id) {
    Nonce n{};
    for (int i = 0; i < 8; ++i) {
      n[static_cast<size_t>(i)] =
          static_cast<std::uint8_t>((log_seq >> (8 * (7 - i))) & 0xff);
    }
    n[8] = gpu_id;
    random_bytes(n.data() + 9, 3);
    return n;
  }

 private:
  LogHeader header_;
  std::vector<TelemetrySample> samples_;
  bool sealed_ = false;
};

// Hands out builders with the per-stream sequence number applied, so two
// consecutive opens on one (node, gpu) stream differ by exactly one.
class LogStream {
 public:
  LogStream(std::uint64_t customer_id, std::uint64_t rental_id,
            std::uint32_t node_id, std::uint8_t gpu_id, std::uint32_t period_us,
            std::uint64_t first_seq = 0)
      : customer_id_(customer_id),
        rental_id_(rental_id),
        node_id_(node_id),
        gpu_id_(gpu_id),
        period_us_(period_us),
        next_seq_(first_seq) {
    if (period_us == 0) fail(ErrorCode::BadArgs, "period must be > 0");
  }

  LogBuilder open(std::uint64_t start_ts_us) {
    return LogBuilder(customer_id_, rental_id_, node_id_, gpu_id_, next_seq_++,
                      period_us_, start_ts_us);
  }

  std::uint64_t next_seq() const { return next_seq_; }

 private:
  std::uint64_t customer_id_, rental_id_;
  std::uint32_t node_id_;
  std::uint8_t gpu_id_;
  std::uint32_t period_us_;
  std::uint64_t next_seq_ = 0;
};

inline std::pair<LogHeader, std::vector<TelemetrySample>> decrypt_log(
    const SealedLog& sealed, const AeadKey& key) {
  return parse_log_plaintext(aead_open(key, sealed.nonce, sealed.ciphertext));
}

inline AeadKey load_key_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open key file " + path);
  AeadKey key{};
  in.read(reinterpret_cast<char*>(key.data()), kKeyBytes);
  if (in.gcount() != static_cast<std::streamsize>(kKeyBytes)) {
    fail(ErrorCode::IoError, "key file " + path + " is not 32 bytes");
  }
  return key;
}

inline void write_key_file(const std::string& path, const AeadKey& key) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write key file " + path);
  out.write(reinterpret_cast<const char*>(key.data()), kKeyBytes);
}

}  // namespace agora::billing
