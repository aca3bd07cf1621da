#pragma once

// Pricing core: the GPU catalog, time-based pricing, and the piecewise-linear
// feature-based pricing curve over bandwidth.
//
// An FbpCurve is anchored at (0, base) and at (bw_upper_i, cap_i) for each
// segment; evaluation interpolates linearly between anchors. Construction
// rejects shapes that violate the tariff constraints: caps must never
// decrease (a price that falls with usage invites customers to inflate
// bandwidth), and breakpoints must strictly increase.
//
// Everything here is immutable after construction and safe to share freely.

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agora/error.hpp"

namespace agora::pricing {

// Bandwidth comparisons allow one part in 1e9 of slack so quantized counter
// readings at a GPU's ceiling still fall inside the domain.
constexpr double kBwRelTol = 1e-9;

struct GpuModel {
  std::string name;
  double bw_max_tbps = 0.0;       // peak memory bandwidth, TB/s
  double compute_peak_tflops = 0.0;
  double ppt_dollars_per_hour = 0.0;  // time-based rental rate
  double eff_bw = 0.8;            // achievable fraction of peak bandwidth
  double eff_comp = 0.8;          // achievable fraction of peak compute

  void validate() const {
    if (name.empty()) fail(ErrorCode::BadArgs, "gpu name empty");
    if (bw_max_tbps <= 0 || compute_peak_tflops <= 0 ||
        ppt_dollars_per_hour <= 0) {
      fail(ErrorCode::BadArgs, "gpu '" + name + "' has non-positive specs");
    }
    if (eff_bw <= 0 || eff_bw > 1 || eff_comp <= 0 || eff_comp > 1) {
      fail(ErrorCode::BadArgs, "gpu '" + name + "' efficiency out of (0,1]");
    }
  }
};

class GpuCatalog {
 public:
  GpuCatalog() = default;

  explicit GpuCatalog(std::vector<GpuModel> models) : models_(std::move(models)) {
    for (const auto& m : models_) m.validate();
    for (size_t i = 1; i < models_.size(); ++i) {
      if (!(models_[i].bw_max_tbps > models_[i - 1].bw_max_tbps)) {
        fail(ErrorCode::BadArgs,
             "catalog must be strictly increasing by bandwidth ('" +
                 models_[i - 1].name + "' vs '" + models_[i].name + "')");
      }
      for (size_t j = 0; j < i; ++j) {
        if (models_[j].name == models_[i].name) {
          fail(ErrorCode::BadArgs, "duplicate gpu name '" + models_[i].name + "'");
        }
      }
    }
  }

  const std::vector<GpuModel>& models() const { return models_; }
  bool empty() const { return models_.empty(); }

  const GpuModel& by_name(const std::string& name) const {
    for (const auto& m : models_) {
      if (m.name == name) return m;
    }
    fail(ErrorCode::BadArgs, "gpu '" + name + "' not in catalog");
  }

  bool contains(const std::string& name) const {
    for (const auto& m : models_) {
      if (m.name == name) return true;
    }
    return false;
  }

 private:
  std::vector<GpuModel> models_;
};

// capability / price, the generation-over-generation scarcity signal.
inline double capability_price_ratio(double capability, double price) {
  if (price <= 0) fail(ErrorCode::BadArgs, "price must be positive");
  return capability / price;
}

inline double tbp_cost(const GpuModel& gpu, double duration_hours) {
  if (duration_hours < 0) fail(ErrorCode::BadArgs, "negative duration");
  return gpu.ppt_dollars_per_hour * duration_hours;
}

struct CurveSegment {
  double bw_upper_tbps = 0.0;
  double cap_dollars_per_hour = 0.0;
};

class FbpCurve {
 public:
  static FbpCurve build(double base, std::vector<CurveSegment> segments) {
    FbpCurve c = unchecked(base, std::move(segments));
    c.validate();
    return c;
  }

  // Skips validation; for loading files that will be handed to
  // validate_desiderata rather than used directly.
  static FbpCurve unchecked(double base, std::vector<CurveSegment> segments) {
    FbpCurve c;
    c.base_ = base;
    c.segments_ = std::move(segments);
    return c;
  }

  double base() const { return base_; }
  const std::vector<CurveSegment>& segments() const { return segments_; }
  double domain_max_tbps() const {
    return segments_.empty() ? 0.0 : segments_.back().bw_upper_tbps;
  }
  double max_cap() const {
    return segments_.empty() ? base_ : segments_.back().cap_dollars_per_hour;
  }

  void validate() const {
    if (segments_.empty()) fail(ErrorCode::BadBreakpoints, "no segments");
    if (base_ <= 0) fail(ErrorCode::NonMonotone, "base must be positive");
    double prev_bw = 0.0;
    double prev_cap = base_;
    for (const auto& s : segments_) {
      if (!(s.bw_upper_tbps > prev_bw)) {
        fail(ErrorCode::BadBreakpoints,
             "breakpoints must strictly increase (got " +
                 std::to_string(s.bw_upper_tbps) + " after " +
                 std::to_string(prev_bw) + ")");
      }
      if (s.cap_dollars_per_hour < prev_cap) {
        fail(ErrorCode::NonMonotone,
             "cap " + std::to_string(s.cap_dollars_per_hour) +
                 " falls below preceding price " + std::to_string(prev_cap));
      }
      prev_bw = s.bw_upper_tbps;
      prev_cap = s.cap_dollars_per_hour;
    }
  }

  // Price per unit time at bandwidth `bw` TB/s; exact at every anchor.
  double price_per_hour(double bw_tbps) const {
    if (bw_tbps < 0) fail(ErrorCode::OutOfDomain, "negative bandwidth");
    const double dmax = domain_max_tbps();
    if (bw_tbps > dmax * (1.0 + kBwRelTol)) {
      fail(ErrorCode::OutOfDomain,
           std::to_string(bw_tbps) + " TB/s exceeds curve domain " +
               std::to_string(dmax) + " TB/s; extend the curve");
    }
    if (bw_tbps >= dmax) return segments_.back().cap_dollars_per_hour;

    double lo_bw = 0.0;
    double lo_price = base_;
    for (const auto& s : segments_) {
      if (bw_tbps <= s.bw_upper_tbps) {
        if (bw_tbps == s.bw_upper_tbps) return s.cap_dollars_per_hour;
        const double t = (bw_tbps - lo_bw) / (s.bw_upper_tbps - lo_bw);
        return lo_price + t * (s.cap_dollars_per_hour - lo_price);
      }
      lo_bw = s.bw_upper_tbps;
      lo_price = s.cap_dollars_per_hour;
    }
    return segments_.back().cap_dollars_per_hour;  // unreachable
  }

  // New piece for a new GPU generation. Existing anchors are untouched, so
  // prices over the old range are preserved bit-for-bit.
  FbpCurve extend(double bw_upper_tbps, double cap_dollars_per_hour) const {
    if (!(bw_upper_tbps > domain_max_tbps())) {
      fail(ErrorCode::BadBreakpoints,
           "extension breakpoint " + std::to_string(bw_upper_tbps) +
               " must exceed current domain " +
               std::to_string(domain_max_tbps()));
    }
    if (cap_dollars_per_hour < max_cap()) {
      fail(ErrorCode::NonMonotone,
           "extension cap below last cap " + std::to_string(max_cap()));
    }
    FbpCurve out = *this;
    out.segments_.push_back({bw_upper_tbps, cap_dollars_per_hour});
    return out;
  }

  bool is_convex() const {
    double prev_slope = -1.0;  // slopes are non-negative for valid curves
    double lo_bw = 0.0;
    double lo_price = base_;
    for (const auto& s : segments_) {
      const double slope =
          (s.cap_dollars_per_hour - lo_price) / (s.bw_upper_tbps - lo_bw);
      if (slope < prev_slope - 1e-12) return false;
      prev_slope = slope;
      lo_bw = s.bw_upper_tbps;
      lo_price = s.cap_dollars_per_hour;
    }
    return true;
  }

  // Every price of `other` at or above this curve's price, over this curve's
  // domain. Dominance propagates to per-job costs and to F%.
  bool dominated_by(const FbpCurve& other) const {
    if (other.domain_max_tbps() < domain_max_tbps() * (1.0 - kBwRelTol)) {
      return false;
    }
    if (other.base() < base_) return false;
    std::vector<double> xs{0.0};
    for (const auto& s : segments_) xs.push_back(s.bw_upper_tbps);
    for (const auto& s : other.segments()) {
      if (s.bw_upper_tbps <= domain_max_tbps()) xs.push_back(s.bw_upper_tbps);
    }
    for (double x : xs) {
      if (other.price_per_hour(x) < price_per_hour(x) - 1e-12) return false;
    }
    return true;
  }

  // "(4, 5.06, 15)" notation.
  std::string notation() const {
    std::ostringstream os;
    os << "(" << base_;
    for (const auto& s : segments_) os << ", " << s.cap_dollars_per_hour;
    os << ")";
    return os.str();
  }

 private:
  FbpCurve() = default;

  double base_ = 0.0;
  std::vector<CurveSegment> segments_;
};

inline FbpCurve build_fbp(double base, std::vector<CurveSegment> segments) {
  return FbpCurve::build(base, std::move(segments));
}

struct DesiderataReport {
  bool monotone = false;
  bool caps_respected = false;
  std::optional<double> f_percent;  // filled by the revenue experiment
  bool convex = false;
  std::vector<std::string> violations;

  bool structurally_ok() const { return monotone && caps_respected; }
};

// Structural desiderata only; F% needs a job set and lives in econ.
inline DesiderataReport validate_desiderata(const FbpCurve& curve,
                                            const GpuCatalog& catalog) {
  DesiderataReport r;
  r.monotone = true;
  r.caps_respected = true;

  if (curve.segments().empty() || curve.base() <= 0) {
    r.monotone = false;
    r.caps_respected = false;
    r.violations.push_back("curve has no segments or non-positive base");
    return r;
  }

  double prev_bw = 0.0;
  double prev_price = curve.base();
  for (const auto& s : curve.segments()) {
    if (!(s.bw_upper_tbps > prev_bw)) {
      r.monotone = false;
      r.violations.push_back("breakpoint " + std::to_string(s.bw_upper_tbps) +
                             " does not increase past " +
                             std::to_string(prev_bw));
    }
    if (s.cap_dollars_per_hour < prev_price) {
      r.monotone = false;
      r.violations.push_back(
          "price decreases from " + std::to_string(prev_price) + " to " +
          std::to_string(s.cap_dollars_per_hour) + " at " +
          std::to_string(s.bw_upper_tbps) + " TB/s");
    }
    prev_bw = s.bw_upper_tbps;
    prev_price = s.cap_dollars_per_hour;
  }

  for (const auto& gpu : catalog.models()) {
    if (gpu.bw_max_tbps > curve.domain_max_tbps() * (1.0 + kBwRelTol)) {
      r.violations.push_back("warning: gpu '" + gpu.name +
                             "' ceiling exceeds curve domain; extend the curve");
      continue;
    }
    bool aligned = false;
    double covering_cap = curve.segments().back().cap_dollars_per_hour;
    for (const auto& s : curve.segments()) {
      if (std::abs(s.bw_upper_tbps - gpu.bw_max_tbps) <=
          kBwRelTol * gpu.bw_max_tbps) {
        aligned = true;
      }
      if (s.bw_upper_tbps >= gpu.bw_max_tbps * (1.0 - kBwRelTol)) {
        covering_cap = s.cap_dollars_per_hour;
        break;
      }
    }
    if (!aligned) {
      r.violations.push_back("warning: gpu '" + gpu.name + "' ceiling " +
                             std::to_string(gpu.bw_max_tbps) +
                             " TB/s is not a curve breakpoint");
    }
    if (r.monotone) {
      const double price_at_ceiling = curve.price_per_hour(
          std::min(gpu.bw_max_tbps, curve.domain_max_tbps()));
      if (price_at_ceiling > covering_cap * (1.0 + 1e-12)) {
        r.caps_respected = false;
        r.violations.push_back("price at '" + gpu.name + "' ceiling (" +
                               std::to_string(price_at_ceiling) +
                               ") exceeds its cap " +
                               std::to_string(covering_cap));
      }
    }
  }
  if (!r.monotone) r.caps_respected = false;
  r.convex = r.monotone && curve.is_convex();
  return r;
}

}  // namespace agora::pricing
