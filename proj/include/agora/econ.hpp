#pragma once

// Revenue simulation: ideal and finite-sampling prices for a trace, Monte
// Carlo experiments over job distributions, and sampling-error sweeps.
//
// Pricing semantics:
//   price_ideal     exact step-function integral of PPT(BW(t)) dt.
//   price_sampled   instantaneous mode prices the bandwidth at each window's
//                   left endpoint; window-average mode prices the
//                   time-weighted mean bandwidth of the window. The final
//                   partial window is priced pro-rata over its actual length.
//   price_ticks_nanos the metering node's arithmetic exactly: one full-period
//                   increment per tick, bandwidth quantized to the 8-byte
//                   sample value, integer nanodollars with half-even
//                   rounding. Node totals must match this to the nanodollar.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agora/error.hpp"
#include "agora/money.hpp"
#include "agora/pricing.hpp"
#include "agora/rng.hpp"
#include "agora/trace.hpp"
#include "agora/workload.hpp"

namespace agora::econ {

using pricing::FbpCurve;
using pricing::GpuCatalog;
using pricing::GpuModel;
using workload::JobDistribution;
using workload::Trace;

enum class SamplingMode : std::uint8_t { Instantaneous, WindowAverage };

struct SamplingConfig {
  std::uint64_t period_us = 50;
  SamplingMode mode = SamplingMode::WindowAverage;

  void validate() const {
    if (period_us == 0) fail(ErrorCode::BadArgs, "sampling period must be > 0");
  }
};

inline double price_ideal(const Trace& trace, const FbpCurve& curve) {
  if (trace.records.empty()) fail(ErrorCode::EmptyTrace, "empty trace");
  double cost_us = 0.0;  // $/h * us
  for (size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    try {
      cost_us += curve.price_per_hour(r.bw_tbps) * r.duration_us;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::OutOfDomain) {
        fail(ErrorCode::OutOfDomain,
             "record " + std::to_string(i) + ": " + e.what());
      }
      throw;
    }
  }
  return cost_us / kMicrosPerHour;
}

inline double price_sampled(const Trace& trace, const FbpCurve& curve,
                            const SamplingConfig& cfg) {
  cfg.validate();
  if (trace.records.empty()) fail(ErrorCode::EmptyTrace, "empty trace");
  const double total = trace.total_duration_us();
  const double dt = static_cast<double>(cfg.period_us);
  const auto& recs = trace.records;

  double cost_us = 0.0;
  size_t ri = 0;
  double rec_start = 0.0;
  for (std::uint64_t w = 0;; ++w) {
    const double w_start = static_cast<double>(w) * dt;
    if (w_start >= total) break;
    const double w_end = std::min(w_start + dt, total);
    while (ri + 1 < recs.size() && rec_start + recs[ri].duration_us <= w_start) {
      rec_start += recs[ri].duration_us;
      ++ri;
    }
    double bw;
    if (cfg.mode == SamplingMode::Instantaneous) {
      bw = recs[ri].bw_tbps;
    } else {
      double acc = 0.0;
      double t = w_start;
      size_t j = ri;
      double j_start = rec_start;
      while (t < w_end && j < recs.size()) {
        const double j_end = j_start + recs[j].duration_us;
        const double seg_end = std::min(j_end, w_end);
        acc += recs[j].bw_tbps * (seg_end - t);
        t = seg_end;
        if (t >= j_end) {
          j_start = j_end;
          ++j;
        }
      }
      bw = acc / (w_end - w_start);
    }
    cost_us += curve.price_per_hour(bw) * (w_end - w_start);
  }
  return cost_us / kMicrosPerHour;
}

// The node agent's view: ticks at i*period while inside the trace, each
// billed a full period at the price of the quantized counter reading.
inline Nanodollars price_ticks_nanos(const Trace& trace, const FbpCurve& curve,
                                     std::uint64_t period_us) {
  if (period_us == 0) fail(ErrorCode::BadArgs, "period must be > 0");
  if (trace.records.empty()) fail(ErrorCode::EmptyTrace, "empty trace");
  const double total = trace.total_duration_us();
  const double dt = static_cast<double>(period_us);
  const auto& recs = trace.records;

  Nanodollars sum = 0;
  size_t ri = 0;
  double rec_start = 0.0;
  for (std::uint64_t i = 0;; ++i) {
    const double t = static_cast<double>(i) * dt;
    if (t >= total) break;
    while (ri + 1 < recs.size() && rec_start + recs[ri].duration_us <= t) {
      rec_start += recs[ri].duration_us;
      ++ri;
    }
    const double bw =
        workload::mbps_to_tbps(workload::bw_to_mbps(recs[ri].bw_tbps));
    sum += tick_increment_nanos(curve.price_per_hour(bw), period_us);
  }
  return sum;
}

// Fraction (0-100) of jobs charged strictly more under FBP; ties count as
// not charged more.
inline double f_percent(const std::vector<double>& costs_fbp,
                        const std::vector<double>& costs_tbp) {
  if (costs_fbp.size() != costs_tbp.size()) {
    fail(ErrorCode::LengthMismatch, "cost vectors differ in length");
  }
  if (costs_fbp.empty()) fail(ErrorCode::Empty, "no costs");
  size_t over = 0;
  for (size_t i = 0; i < costs_fbp.size(); ++i) {
    if (costs_fbp[i] > costs_tbp[i]) ++over;
  }
  return 100.0 * static_cast<double>(over) /
         static_cast<double>(costs_fbp.size());
}

// ---------------------------------------------------------------------------
// Monte Carlo experiments
// ---------------------------------------------------------------------------

struct RevenueReport {
  std::uint64_t n_jobs = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> mean_tbp;  // dollars per job, keyed by gpu
  double mean_fbp = 0.0;                   // dollars per job on reference gpu
  std::optional<double> per_token_fbp_nanos;
  double f_percent = 0.0;
  std::string reference_gpu;
};

namespace detail {

// Per-entry costs are draw-independent, so price each entry once and let the
// draw loop accumulate cached values.
struct EntryCosts {
  double fbp_cost = 0.0;
  double fbp_per_token_nanos = 0.0;
  bool has_tokens = false;
  std::map<std::string, double> ttc_hours;
};

inline std::vector<EntryCosts> price_entries(
    const JobDistribution& dist, const FbpCurve& curve,
    const GpuCatalog& catalog, const std::string& reference_gpu,
    const std::vector<std::string>& tbp_gpus) {
  std::vector<EntryCosts> out;
  out.reserve(dist.entries.size());
  for (const auto& entry : dist.entries) {
    EntryCosts c;
    if (entry.weight > 0) {
      const Trace ref_trace =
          workload::job_trace(entry.job, catalog.by_name(reference_gpu));
      c.fbp_cost = price_ideal(ref_trace, curve);
      if (ref_trace.token_count && *ref_trace.token_count > 0) {
        c.has_tokens = true;
        c.fbp_per_token_nanos = c.fbp_cost * kNanosPerDollar /
                                static_cast<double>(*ref_trace.token_count);
      }
      for (const auto& g : tbp_gpus) {
        const Trace t = workload::job_trace(entry.job, catalog.by_name(g));
        c.ttc_hours[g] = t.total_duration_hours();
      }
      if (!c.ttc_hours.count(reference_gpu)) {
        c.ttc_hours[reference_gpu] = ref_trace.total_duration_hours();
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace detail

inline RevenueReport run_experiment(const JobDistribution& dist,
                                    const FbpCurve& curve,
                                    const GpuCatalog& catalog,
                                    const std::string& reference_gpu,
                                    const std::vector<std::string>& tbp_gpus,
                                    std::uint64_t n_jobs, std::uint64_t seed) {
  dist.validate();
  if (n_jobs == 0) fail(ErrorCode::BadArgs, "n_jobs must be positive");
  const auto costs =
      detail::price_entries(dist, curve, catalog, reference_gpu, tbp_gpus);
  const double ref_ppt = catalog.by_name(reference_gpu).ppt_dollars_per_hour;

  RevenueReport rep;
  rep.n_jobs = n_jobs;
  rep.seed = seed;
  rep.reference_gpu = reference_gpu;

  Rng rng(seed);
  double fbp_sum = 0.0;
  double per_token_sum = 0.0;
  std::uint64_t token_jobs = 0;
  std::uint64_t over = 0;
  std::map<std::string, double> tbp_sums;
  for (const auto& g : tbp_gpus) tbp_sums[g] = 0.0;

  for (std::uint64_t i = 0; i < n_jobs; ++i) {
    const size_t idx = workload::sample_job_index(dist, rng);
    const auto& c = costs[idx];
    fbp_sum += c.fbp_cost;
    if (c.has_tokens) {
      per_token_sum += c.fbp_per_token_nanos;
      ++token_jobs;
    }
    for (const auto& g : tbp_gpus) {
      tbp_sums[g] +=
          c.ttc_hours.at(g) * catalog.by_name(g).ppt_dollars_per_hour;
    }
    if (c.fbp_cost > c.ttc_hours.at(reference_gpu) * ref_ppt) ++over;
  }

  const double n = static_cast<double>(n_jobs);
  rep.mean_fbp = fbp_sum / n;
  for (auto& [g, sum] : tbp_sums) rep.mean_tbp[g] = sum / n;
  if (token_jobs > 0) {
    rep.per_token_fbp_nanos = per_token_sum / static_cast<double>(token_jobs);
  }
  rep.f_percent = 100.0 * static_cast<double>(over) / n;
  return rep;
}

inline RevenueReport run_experiment(const JobDistribution& dist,
                                    const FbpCurve& curve,
                                    const GpuCatalog& catalog,
                                    const std::string& reference_gpu,
                                    std::uint64_t n_jobs, std::uint64_t seed) {
  // Default TBP set: every catalog gpu bound by all weighted entries.
  std::vector<std::string> gpus;
  for (const auto& m : catalog.models()) {
    bool all = true;
    for (const auto& e : dist.entries) {
      if (e.weight > 0 && !e.job.has_binding(m.name)) {
        all = false;
        break;
      }
    }
    if (all) gpus.push_back(m.name);
  }
  return run_experiment(dist, curve, catalog, reference_gpu, gpus, n_jobs, seed);
}

// ---------------------------------------------------------------------------
// Sampling-error sweep (paired design: one job draw shared by all periods)
// ---------------------------------------------------------------------------

struct SamplingErrorRow {
  std::uint64_t period_us = 0;
  double ideal_mean = 0.0;
  double real_mean = 0.0;
  double percent_error = 0.0;  // negative = undercharge
};

inline std::vector<SamplingErrorRow> sampling_error_sweep(
    const JobDistribution& dist, const FbpCurve& curve,
    const GpuCatalog& catalog, const std::string& reference_gpu,
    const std::vector<std::uint64_t>& periods_us, std::uint64_t n_jobs,
    std::uint64_t seed) {
  if (periods_us.empty()) fail(ErrorCode::BadArgs, "no sampling periods");
  dist.validate();
  if (n_jobs == 0) fail(ErrorCode::BadArgs, "n_jobs must be positive");

  const auto& ref = catalog.by_name(reference_gpu);
  std::vector<Trace> entry_traces;
  std::vector<double> entry_ideal;
  entry_traces.reserve(dist.entries.size());
  for (const auto& e : dist.entries) {
    if (e.weight > 0) {
      entry_traces.push_back(workload::job_trace(e.job, ref));
      entry_ideal.push_back(price_ideal(entry_traces.back(), curve));
    } else {
      entry_traces.emplace_back();
      entry_ideal.push_back(0.0);
    }
  }

  Rng rng(seed);
  std::vector<std::uint64_t> draw_count(dist.entries.size(), 0);
  for (std::uint64_t i = 0; i < n_jobs; ++i) {
    ++draw_count[workload::sample_job_index(dist, rng)];
  }

  std::vector<SamplingErrorRow> rows;
  rows.reserve(periods_us.size());
  for (std::uint64_t period : periods_us) {
    SamplingConfig cfg{period, SamplingMode::WindowAverage};
    double ideal_sum = 0.0;
    double real_sum = 0.0;
    for (size_t e = 0; e < dist.entries.size(); ++e) {
      if (draw_count[e] == 0) continue;
      const double w = static_cast<double>(draw_count[e]);
      ideal_sum += w * entry_ideal[e];
      real_sum += w * price_sampled(entry_traces[e], curve, cfg);
    }
    SamplingErrorRow row;
    row.period_us = period;
    row.ideal_mean = ideal_sum / static_cast<double>(n_jobs);
    row.real_mean = real_sum / static_cast<double>(n_jobs);
    row.percent_error =
        row.ideal_mean == 0.0
            ? 0.0
            : (row.real_mean - row.ideal_mean) / row.ideal_mean * 100.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace agora::econ
