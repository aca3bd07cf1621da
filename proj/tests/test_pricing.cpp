#include <doctest.h>

#include <cmath>

#include "agora/money.hpp"
#include "agora/pricing.hpp"
#include "helpers.hpp"

using namespace agora;
using namespace agora::pricing;
using testutil::default_catalog;
using testutil::paper_curve;

TEST_CASE("capability/price ratios match the published catalog") {
  const auto catalog = default_catalog();
  // (bw/p, comp/p) per generation; comp ratios are in 100s of TFLOPS.
  const struct {
    const char* name;
    double bw_ratio;
    double comp_ratio;
  } expected[] = {
      {"P100", 0.515, 0.128},
      {"V100", 0.363, 0.504},
      {"A100", 0.402, 0.617},
      {"H100", 0.302, 0.895},
  };
  for (const auto& e : expected) {
    const auto& gpu = catalog.by_name(e.name);
    CHECK(std::abs(capability_price_ratio(gpu.bw_max_tbps,
                                          gpu.ppt_dollars_per_hour) -
                   e.bw_ratio) < 0.001);
    CHECK(std::abs(capability_price_ratio(gpu.compute_peak_tflops / 100.0,
                                          gpu.ppt_dollars_per_hour) -
                   e.comp_ratio) < 0.001);
  }
  CHECK_THROWS_AS(capability_price_ratio(1.0, 0.0), Error);
}

TEST_CASE("tbp_cost is rate times duration") {
  const auto catalog = default_catalog();
  CHECK(tbp_cost(catalog.by_name("H100"), 1.0) == doctest::Approx(11.06));
  CHECK(tbp_cost(catalog.by_name("A100"), 0.0) == 0.0);
  CHECK(tbp_cost(catalog.by_name("A100"), 2.0) == doctest::Approx(10.12));
  CHECK_THROWS_AS(tbp_cost(catalog.by_name("A100"), -1.0), Error);
}

TEST_CASE("curve construction enforces the tariff constraints") {
  CHECK(paper_curve().notation() == "(4, 5.06, 15)");

  // cap may equal base (flat first segment)
  CHECK_NOTHROW(build_fbp(4.0, {{2.039, 4.0}}));

  CHECK_THROWS_WITH_AS(build_fbp(4.0, {{2.039, 3.0}}),
                       doctest::Contains("NonMonotone"), Error);
  CHECK_THROWS_AS(build_fbp(4.0, {{2.039, 5.0}, {2.039, 6.0}}), Error);
  CHECK_THROWS_AS(build_fbp(4.0, {{2.039, 5.0}, {1.0, 6.0}}), Error);
  CHECK_THROWS_AS(build_fbp(4.0, {}), Error);
  try {
    build_fbp(4.0, {{2.0, 5.0}, {1.0, 6.0}});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadBreakpoints);
  }
}

TEST_CASE("curve evaluation hits every anchor exactly and lerps between") {
  const auto curve = paper_curve();
  CHECK(curve.price_per_hour(0.0) == 4.0);
  CHECK(curve.price_per_hour(2.039) == 5.06);
  CHECK(curve.price_per_hour(3.35) == 15.0);
  // hand interpolation at the midpoint of the first segment
  CHECK(curve.price_per_hour(1.0195) == doctest::Approx(4.53).epsilon(1e-9));

  CHECK_THROWS_AS(curve.price_per_hour(4.0), Error);
  try {
    curve.price_per_hour(4.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfDomain);
  }
  CHECK_THROWS_AS(curve.price_per_hour(-0.1), Error);
}

TEST_CASE("extension appends a piece and preserves the old domain bit-for-bit") {
  const auto curve = paper_curve();
  const auto extended = curve.extend(8.0, 30.0);
  CHECK(extended.notation() == "(4, 5.06, 15, 30)");
  CHECK(extended.price_per_hour(8.0) == 30.0);

  testutil::Rng rng(2024);
  for (int i = 0; i < 2000; ++i) {
    const double bw = rng.next_double() * curve.domain_max_tbps();
    CHECK(curve.price_per_hour(bw) == extended.price_per_hour(bw));
  }
  // anchors stay exact
  CHECK(extended.price_per_hour(2.039) == 5.06);
  CHECK(extended.price_per_hour(3.35) == 15.0);

  CHECK_NOTHROW(curve.extend(8.0, 15.0));  // flat extension
  CHECK_THROWS_AS(curve.extend(3.0, 30.0), Error);
  CHECK_THROWS_AS(curve.extend(8.0, 14.0), Error);
}

TEST_CASE("quantified monotonicity over random curves") {
  testutil::Rng rng(77);
  for (int c = 0; c < 200; ++c) {
    const auto curve = testutil::random_curve(rng, 3.35, c % 2 == 0);
    for (int i = 0; i < 50; ++i) {
      double x = rng.next_double() * 3.35;
      double y = rng.next_double() * 3.35;
      if (x > y) std::swap(x, y);
      CHECK(curve.price_per_hour(x) <= curve.price_per_hour(y) + 1e-12);
    }
  }
}

TEST_CASE("random curve evaluation agrees with the anchor-lerp oracle") {
  testutil::Rng rng(88);
  for (int c = 0; c < 100; ++c) {
    const auto curve = testutil::random_curve(rng, 3.35, false);
    for (int i = 0; i < 30; ++i) {
      const double bw = rng.next_double() * 3.35;
      CHECK(curve.price_per_hour(bw) ==
            doctest::Approx(testutil::oracle_ppt(curve, bw)).epsilon(1e-12));
    }
  }
}

TEST_CASE("convexity detection and the Jensen bound") {
  CHECK(paper_curve().is_convex());  // slopes 0.52 then 7.58
  CHECK_FALSE(build_fbp(4.0, {{1.0, 10.0}, {3.35, 11.0}}).is_convex());

  testutil::Rng rng(99);
  for (int c = 0; c < 100; ++c) {
    const auto curve = testutil::random_curve(rng, 3.35, true);
    REQUIRE(curve.is_convex());
    // Jensen by brute force: PPT(mean) <= mean(PPT) over random multisets.
    for (int trial = 0; trial < 10; ++trial) {
      const size_t n = 2 + rng.next_below(6);
      double mean_bw = 0.0;
      double mean_ppt = 0.0;
      std::vector<double> bws(n);
      for (auto& bw : bws) {
        bw = rng.next_double() * 3.35;
        mean_bw += bw;
        mean_ppt += curve.price_per_hour(bw);
      }
      mean_bw /= static_cast<double>(n);
      mean_ppt /= static_cast<double>(n);
      CHECK(curve.price_per_hour(mean_bw) <= mean_ppt + 1e-9);
    }
  }
}

TEST_CASE("pointwise dominance ordering") {
  const auto a = paper_curve();
  const auto b = build_fbp(4.0, {{2.039, 7.0}, {3.35, 30.0}});
  const auto c = build_fbp(4.0, {{2.039, 10.0}, {3.35, 60.0}});
  CHECK(a.dominated_by(b));
  CHECK(b.dominated_by(c));
  CHECK(a.dominated_by(c));
  CHECK_FALSE(b.dominated_by(a));
  CHECK(a.dominated_by(a));
}

TEST_CASE("desiderata validation") {
  const auto catalog = default_catalog();

  SUBCASE("well-formed curve against the catalog") {
    const auto r = validate_desiderata(paper_curve(), catalog);
    CHECK(r.monotone);
    CHECK(r.caps_respected);
    CHECK(r.convex);
    CHECK_FALSE(r.f_percent.has_value());
    // P100/V100 ceilings are not breakpoints of the two-piece curve
    CHECK(r.violations.size() == 2);
  }

  SUBCASE("decreasing segment flags monotone=false") {
    const auto bad = FbpCurve::unchecked(4.0, {{2.039, 5.06}, {3.35, 2.0}});
    const auto r = validate_desiderata(bad, catalog);
    CHECK_FALSE(r.monotone);
    CHECK_FALSE(r.caps_respected);
    CHECK(!r.violations.empty());
  }

  SUBCASE("misaligned breakpoints warn but stay valid") {
    const auto curve = build_fbp(4.0, {{2.0, 5.06}, {3.35, 15.0}});
    const auto r = validate_desiderata(curve, catalog);
    CHECK(r.monotone);
    CHECK(r.caps_respected);
    bool warned = false;
    for (const auto& v : r.violations) {
      if (v.find("A100") != std::string::npos) warned = true;
    }
    CHECK(warned);
  }

  SUBCASE("curve not covering the newest gpu warns") {
    const auto curve = build_fbp(4.0, {{2.039, 5.06}});
    const auto r = validate_desiderata(curve, catalog);
    bool warned = false;
    for (const auto& v : r.violations) {
      if (v.find("H100") != std::string::npos) warned = true;
    }
    CHECK(warned);
  }
}

TEST_CASE("catalog rejects bad shapes") {
  CHECK_THROWS_AS(GpuCatalog({{"A", 2.0, 1.0, 1.0}, {"B", 1.0, 1.0, 1.0}}), Error);
  CHECK_THROWS_AS(GpuCatalog({{"A", 1.0, 1.0, 1.0}, {"A", 2.0, 1.0, 1.0}}), Error);
  CHECK_THROWS_AS(GpuCatalog({{"A", 0.0, 1.0, 1.0}}), Error);
  const auto catalog = default_catalog();
  CHECK_THROWS_AS(catalog.by_name("B200"), Error);
}

TEST_CASE("nanodollar rounding is half-to-even") {
  CHECK(round_half_even(2.5) == 2);
  CHECK(round_half_even(3.5) == 4);
  CHECK(round_half_even(-2.5) == -2);
  CHECK(round_half_even(2.4999) == 2);
  CHECK(round_half_even(2.5001) == 3);
  // The worked sampling increment: $5.06/h for 50us = 70.27..nano -> 70
  CHECK(tick_increment_nanos(5.06, 50) == 70);
}
