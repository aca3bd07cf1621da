#include <doctest.h>

#include "agora/billing.hpp"
#include "agora/codec.hpp"
#include "agora/frame.hpp"
#include "agora/rng.hpp"

using namespace agora;
using namespace agora::billing;

namespace {

AeadKey test_key(std::uint8_t fill = 0x42) {
  AeadKey k;
  k.fill(fill);
  return k;
}

std::vector<TelemetrySample> random_samples(Rng& rng, size_t n) {
  std::vector<TelemetrySample> out(n);
  for (auto& s : out) {
    s.bw_mbps = static_cast<std::uint32_t>(rng.next_u64());
    s.compute_util = static_cast<std::uint16_t>(rng.next_u64());
    s.dram_util = static_cast<std::uint16_t>(rng.next_u64());
  }
  return out;
}

}  // namespace

TEST_CASE("zigzag and varint primitives") {
  for (std::int64_t v :
       std::initializer_list<std::int64_t>{0, 1, -1, 2, -2, 1000000, -1000000,
                                           INT64_MAX, INT64_MIN}) {
    CHECK(zigzag_decode(zigzag_encode(v)) == v);
  }
  std::string buf;
  varint_append(buf, 0);
  CHECK(buf.size() == 1);
  varint_append(buf, 300);
  varint_append(buf, UINT64_MAX);
  size_t pos = 0;
  CHECK(varint_read(buf, pos) == 0);
  CHECK(varint_read(buf, pos) == 300);
  CHECK(varint_read(buf, pos) == UINT64_MAX);
  CHECK(pos == buf.size());

  // truncated varint
  std::string bad(1, '\x80');
  pos = 0;
  CHECK_THROWS_AS(varint_read(bad, pos), Error);
}

TEST_CASE("sample compression is lossless on random input") {
  Rng rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    const auto samples = random_samples(rng, rng.next_below(400));
    const auto packed = compress_samples(samples);
    const auto back =
        decompress_samples(packed, static_cast<std::uint32_t>(samples.size()));
    CHECK(back == samples);
  }
}

TEST_CASE("steady telemetry compresses below raw size from 16 samples up") {
  TelemetrySample s{1234567, 30000, 40000};
  for (size_t n : {16ull, 64ull, 1024ull}) {
    std::vector<TelemetrySample> samples(n, s);
    const auto packed = compress_samples(samples);
    CHECK(packed.size() < 8 * n);
  }
}

TEST_CASE("log builder accumulates integer nanodollars exactly") {
  LogBuilder b(1001, 5001, 1, 0, 0, 50, 0);
  CHECK(b.header().amount == 0);
  CHECK(b.sample_count() == 0);

  for (int i = 0; i < 3; ++i) b.append_sample({100, 1, 1}, 70);
  CHECK(b.header().amount == 210);
  CHECK(b.sample_count() == 3);

  auto sealed = b.seal(test_key());
  CHECK(b.sealed());
  CHECK_THROWS_AS(b.append_sample({1, 1, 1}, 1), Error);
  try {
    b.append_sample({1, 1, 1}, 1);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Sealed);
  }
  (void)sealed;

  CHECK_THROWS_AS(LogBuilder(1, 1, 1, 0, 0, 0, 0), Error);  // zero period
}

TEST_CASE("log stream hands out consecutive sequence numbers") {
  LogStream stream(1001, 5001, 1, 3, 50);
  auto b0 = stream.open(0);
  auto b1 = stream.open(1000);
  CHECK(b0.header().log_seq == 0);
  CHECK(b1.header().log_seq == 1);
  CHECK(b1.header().log_seq == b0.header().log_seq + 1);
  CHECK(b1.header().gpu_id == 3);
}

TEST_CASE("seal/decrypt round trip preserves header and samples") {
  Rng rng(202);
  const auto key = test_key();
  for (int trial = 0; trial < 30; ++trial) {
    LogBuilder b(rng.next_u64(), rng.next_u64(),
                 static_cast<std::uint32_t>(rng.next_u64()),
                 static_cast<std::uint8_t>(rng.next_u64()), rng.next_below(1000),
                 50, rng.next_u64());
    const auto samples = random_samples(rng, rng.next_below(200));
    for (const auto& s : samples) {
      b.append_sample(s, static_cast<Nanodollars>(rng.next_below(1000)));
    }
    const LogHeader expect = b.header();
    auto sealed = b.seal(test_key());
    const auto [header, got] = decrypt_log(sealed, key);
    CHECK(header == expect);
    CHECK(got == samples);
  }
}

TEST_CASE("empty log seals and round-trips") {
  LogBuilder b(1, 2, 3, 4, 5, 50, 6);
  auto sealed = b.seal(test_key());
  const auto [header, samples] = decrypt_log(sealed, test_key());
  CHECK(header.amount == 0);
  CHECK(header.sample_count == 0);
  CHECK(samples.empty());
}

TEST_CASE("wrong key and tampering fail authentication") {
  LogBuilder b(1, 2, 3, 4, 5, 50, 6);
  b.append_sample({100, 200, 300}, 70);
  auto sealed = b.seal(test_key());

  SUBCASE("wrong key") {
    CHECK_THROWS_AS(decrypt_log(sealed, test_key(0x43)), Error);
  }
  SUBCASE("single flipped ciphertext bit") {
    sealed.ciphertext[0] = static_cast<char>(sealed.ciphertext[0] ^ 0x01);
    try {
      decrypt_log(sealed, test_key());
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AuthFailure);
    }
  }
  SUBCASE("flipped nonce bit") {
    sealed.nonce[11] ^= 0x80;
    CHECK_THROWS_AS(decrypt_log(sealed, test_key()), Error);
  }
}

TEST_CASE("seal enforces max_samples") {
  LogBuilder b(1, 2, 3, 4, 5, 50, 6);
  for (int i = 0; i < 10; ++i) b.append_sample({1, 1, 1}, 1);
  CHECK_THROWS_AS(b.seal(test_key(), 9), Error);
}

TEST_CASE("wire frame codec") {
  Rng rng(303);
  WireFrame f;
  f.customer_id = 1001;
  f.rental_id = 5001;
  f.node_id = 7;
  f.gpu_id = 3;
  f.log_seq = 42;
  f.payload = "hello sealed bytes";

  SUBCASE("round trip identity") {
    CHECK(decode_frame(encode_frame(f)) == f);
  }
  SUBCASE("corrupted first byte is BadMagic") {
    auto bytes = encode_frame(f);
    bytes[0] = 'X';
    try {
      decode_frame(bytes);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BadMagic);
    }
  }
  SUBCASE("bad version") {
    auto bytes = encode_frame(f);
    bytes[4] = 9;
    try {
      decode_frame(bytes);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BadVersion);
    }
  }
  SUBCASE("declared payload length beyond the buffer is Truncated") {
    auto bytes = encode_frame(f);
    bytes.resize(bytes.size() - 4);
    try {
      decode_frame(bytes);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Truncated);
    }
  }
  SUBCASE("oversized payload is rejected at encode time") {
    WireFrame big = f;
    big.payload.assign(kMaxPayloadBytes + 1, 'x');
    try {
      encode_frame(big);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Oversize);
    }
  }
  SUBCASE("prefix safety: k concatenated frames decode to k frames in order") {
    std::string stream;
    std::vector<WireFrame> sent;
    const size_t k = 1 + rng.next_below(20);
    for (size_t i = 0; i < k; ++i) {
      WireFrame fi = f;
      fi.log_seq = i;
      fi.payload = std::string(rng.next_below(100), static_cast<char>('a' + i % 26));
      stream += encode_frame(fi);
      sent.push_back(std::move(fi));
    }
    const auto got = decode_frames(stream);
    CHECK(got == sent);
  }
}

TEST_CASE("ack codec") {
  Ack a{7, 3, 42, AckStatus::Ok};
  const auto bytes = encode_ack(a);
  CHECK(bytes.size() == kAckBytes);
  CHECK(decode_ack(bytes) == a);

  Ack bad{7, 3, 42, AckStatus::AuthFailure};
  CHECK(decode_ack(encode_ack(bad)).status == AckStatus::AuthFailure);
}

TEST_CASE("frame payload helpers split the send timestamp") {
  LogBuilder b(1, 2, 3, 4, 5, 50, 6);
  b.append_sample({9, 9, 9}, 3);
  const auto sealed = b.seal(test_key());
  const auto payload = make_frame_payload(123456789, sealed);
  const auto [ts, back] = split_frame_payload(payload);
  CHECK(ts == 123456789);
  CHECK(back.to_bytes() == sealed.to_bytes());
  CHECK_THROWS_AS(split_frame_payload("short"), Error);
}

TEST_CASE("log plaintext serialization round-trips and rejects junk") {
  LogHeader h;
  h.amount = -5;  // negative amounts survive the u64 wire form
  h.date_us = 1;
  h.customer_id = 2;
  h.rental_id = 3;
  h.node_id = 4;
  h.gpu_id = 5;
  h.log_seq = 6;
  h.period_us = 7;
  h.start_ts_us = 8;
  h.sample_count = 2;
  const std::vector<TelemetrySample> samples{{1, 2, 3}, {4, 5, 6}};
  const auto bytes = serialize_log_plaintext(h, samples);
  const auto [h2, s2] = parse_log_plaintext(bytes);
  CHECK(h2 == h);
  CHECK(s2 == samples);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_log_plaintext(bad), Error);
  CHECK_THROWS_AS(parse_log_plaintext(bytes.substr(0, 10)), Error);
}
