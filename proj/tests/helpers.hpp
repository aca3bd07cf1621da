#pragma once

// Shared test fixtures and independent oracles. The oracles re-derive
// expected values through a different code path than the library (anchor-list
// lerp for curve evaluation, direct sums for pricing) so agreement is
// meaningful.

#include <cmath>
#include <vector>

#include "agora/pricing.hpp"
#include "agora/rng.hpp"
#include "agora/trace.hpp"

namespace testutil {

using agora::Rng;
using agora::pricing::CurveSegment;
using agora::pricing::FbpCurve;
using agora::pricing::GpuCatalog;
using agora::pricing::GpuModel;
using agora::workload::Trace;
using agora::workload::UtilizationRecord;

// Table-2 shaped catalog used across the suite.
inline GpuCatalog default_catalog() {
  return GpuCatalog({
      {"P100", 0.752, 18.7, 1.46},
      {"V100", 0.9, 125.0, 2.48},
      {"A100", 2.039, 312.0, 5.06},
      {"H100", 3.35, 990.0, 11.06},
  });
}

inline FbpCurve paper_curve() {
  return agora::pricing::build_fbp(4.0, {{2.039, 5.06}, {3.35, 15.0}});
}

// Independent piecewise-linear evaluation over explicit anchor points.
inline double oracle_ppt(const FbpCurve& curve, double bw) {
  std::vector<std::pair<double, double>> anchors{{0.0, curve.base()}};
  for (const auto& s : curve.segments()) {
    anchors.emplace_back(s.bw_upper_tbps, s.cap_dollars_per_hour);
  }
  for (size_t i = 1; i < anchors.size(); ++i) {
    if (bw <= anchors[i].first) {
      const auto [x0, y0] = anchors[i - 1];
      const auto [x1, y1] = anchors[i];
      return y0 + (y1 - y0) * (bw - x0) / (x1 - x0);
    }
  }
  return anchors.back().second;
}

inline double oracle_price_ideal(const Trace& t, const FbpCurve& curve) {
  double dollars = 0.0;
  for (const auto& r : t.records) {
    dollars += oracle_ppt(curve, r.bw_tbps) * (r.duration_us / 3.6e9);
  }
  return dollars;
}

// Random monotone curve over [0, bw_limit]; convex when requested (convex
// curves have non-decreasing segment slopes by construction).
inline FbpCurve random_curve(Rng& rng, double bw_limit, bool convex) {
  const int n_segments = 1 + static_cast<int>(rng.next_below(3));
  const double base = 0.5 + rng.next_double() * 8.0;
  std::vector<CurveSegment> segments;
  double prev_cap = base;
  double slope = rng.next_double() * 3.0;
  for (int i = 0; i < n_segments; ++i) {
    const double bw_upper =
        bw_limit * (static_cast<double>(i + 1) / n_segments);
    const double width = bw_limit / n_segments;
    if (convex) {
      slope += rng.next_double() * 4.0;  // slopes only grow
    } else {
      slope = rng.next_double() * 6.0;
    }
    const double cap = prev_cap + slope * width;
    segments.push_back({bw_upper, cap});
    prev_cap = cap;
  }
  return agora::pricing::build_fbp(base, std::move(segments));
}

// Random trace with integer-microsecond durations (so dyadic sampling
// periods eventually divide every record).
inline Trace random_trace(Rng& rng, double bw_max, size_t max_records = 30,
                          std::uint64_t max_duration_us = 3000) {
  Trace t;
  t.gpu = "H100";
  const size_t n = 1 + rng.next_below(max_records);
  t.records.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    UtilizationRecord r;
    r.duration_us = static_cast<double>(1 + rng.next_below(max_duration_us));
    r.bw_tbps = rng.next_double() * bw_max;
    r.compute_util = rng.next_double();
    r.dram_util = rng.next_double();
    t.records.push_back(std::move(r));
  }
  return t;
}

}  // namespace testutil
