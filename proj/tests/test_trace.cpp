#include <doctest.h>

#include "agora/trace.hpp"
#include "helpers.hpp"

using namespace agora;
using namespace agora::workload;
using testutil::default_catalog;

TEST_CASE("csv parse: canonical single-row fixture") {
  const auto catalog = default_catalog();
  const std::string csv =
      "duration_us,bw_tbps,compute_util,dram_util,label\n"
      "1000,0.62,0.5,0.4,kernA\n";
  const Trace t = parse_trace_csv(csv, catalog.by_name("H100"));
  REQUIRE(t.records.size() == 1);
  CHECK(t.records[0].duration_us == 1000.0);
  CHECK(t.records[0].bw_tbps == 0.62);
  CHECK(t.records[0].label == "kernA");
  CHECK(t.total_duration_us() == 1000.0);
  CHECK(t.gpu == "H100");
}

TEST_CASE("csv parse error paths") {
  const auto catalog = default_catalog();
  const auto& h100 = catalog.by_name("H100");
  const auto& a100 = catalog.by_name("A100");

  CHECK_THROWS_AS(parse_trace_csv("", h100), Error);
  try {
    parse_trace_csv("", h100);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyTrace);
  }

  const std::string hdr = "duration_us,bw_tbps,compute_util,dram_util,label\n";
  CHECK_THROWS_AS(parse_trace_csv(hdr, h100), Error);  // header only

  try {
    parse_trace_csv(hdr + "1000,5.0,0.5,0.4,k\n", a100);  // 5 TB/s on A100
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BwExceedsGpu);
  }

  try {
    parse_trace_csv(hdr + "abc,0.5,0.5,0.4,k\n", h100);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Malformed);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_trace_csv(hdr + "1000,0.5\n", h100), Error);
  CHECK_THROWS_AS(parse_trace_csv(hdr + "0,0.5,0.5,0.4,k\n", h100), Error);
  CHECK_THROWS_AS(parse_trace_csv(hdr + "1000,0.5,1.5,0.4,k\n", h100), Error);
  CHECK_THROWS_AS(parse_trace_csv("wrong,header\n1,2,3,4\n", h100), Error);
}

TEST_CASE("csv round trip is the identity") {
  const auto catalog = default_catalog();
  testutil::Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    Trace t = testutil::random_trace(rng, 3.35);
    t.records[0].label = "step_0";
    const Trace back = parse_trace_csv(serialize_trace_csv(t), catalog.by_name("H100"));
    CHECK(back == t);
  }
}

TEST_CASE("binary round trip is the identity on quantized traces") {
  const auto catalog = default_catalog();
  testutil::Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    // Build a fixed-period trace whose values sit on the quantization grid.
    Trace t;
    t.gpu = "A100";
    const std::uint32_t period = 50;
    const size_t n = 1 + rng.next_below(200);
    for (size_t k = 0; k < n; ++k) {
      UtilizationRecord r;
      r.duration_us = period;
      r.bw_tbps = mbps_to_tbps(static_cast<std::uint32_t>(rng.next_below(2039000)));
      r.compute_util = u16_to_util(static_cast<std::uint16_t>(rng.next_below(65536)));
      r.dram_util = u16_to_util(static_cast<std::uint16_t>(rng.next_below(65536)));
      t.records.push_back(std::move(r));
    }
    const std::string bytes = serialize_trace_binary(t, period);
    CHECK(bytes.size() == kTracePreambleBytes + 8 * n);
    const Trace back = parse_trace_binary(bytes, catalog);
    CHECK(back == t);
    // byte-level identity the other way
    CHECK(serialize_trace_binary(back, period) == bytes);
  }
}

TEST_CASE("binary parse error paths") {
  const auto catalog = default_catalog();
  Trace t;
  t.gpu = "H100";
  t.records.push_back({50.0, 1.0, 0.5, 0.5, ""});
  std::string bytes = serialize_trace_binary(t, 50);

  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(parse_trace_binary(bytes, catalog), Error);
  }
  SUBCASE("short preamble") {
    CHECK_THROWS_AS(parse_trace_binary(bytes.substr(0, 10), catalog), Error);
  }
  SUBCASE("record count mismatch") {
    CHECK_THROWS_AS(parse_trace_binary(bytes + "xx", catalog), Error);
  }
  SUBCASE("serializing variable-period trace is rejected") {
    t.records.push_back({60.0, 1.0, 0.5, 0.5, ""});
    CHECK_THROWS_AS(serialize_trace_binary(t, 50), Error);
  }
}

TEST_CASE("trace stats") {
  Trace t;
  t.gpu = "H100";

  SUBCASE("constant trace: mean == peak == value") {
    for (int i = 0; i < 4; ++i) t.records.push_back({10.0, 1.5, 0.5, 0.5, ""});
    const auto s = trace_stats(t);
    CHECK(s.mean_bw_tbps == doctest::Approx(1.5));
    CHECK(s.peak_bw_tbps == 1.5);
    CHECK(s.total_duration_us == 40.0);
  }
  SUBCASE("two equal-duration records average") {
    t.records.push_back({100.0, 0.0, 0.5, 0.5, ""});
    t.records.push_back({100.0, 2.039, 0.5, 0.5, ""});
    CHECK(trace_stats(t).mean_bw_tbps == doctest::Approx(1.0195));
  }
  SUBCASE("time-weighted average") {
    t.records.push_back({1.0, 3.0, 0.5, 0.5, ""});
    t.records.push_back({3.0, 1.0, 0.5, 0.5, ""});
    CHECK(trace_stats(t).mean_bw_tbps == doctest::Approx(1.5));
  }
  SUBCASE("empty trace throws") {
    CHECK_THROWS_AS(trace_stats(t), Error);
  }
}
