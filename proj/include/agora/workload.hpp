#pragma once

// Job supply: synthetic trace generation and weighted job distributions.
// Everything is deterministic for a fixed seed; per-job randomness derives
// from (master seed, job index) so draws can be evaluated in any order.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "agora/error.hpp"
#include "agora/llm.hpp"
#include "agora/pricing.hpp"
#include "agora/rng.hpp"
#include "agora/trace.hpp"

namespace agora::workload {

// ---------------------------------------------------------------------------
// Synthetic traces
// ---------------------------------------------------------------------------

struct ValueDist {
  enum class Kind : std::uint8_t { Constant, Uniform, UniformInt, Choice };
  Kind kind = Kind::Constant;
  double constant = 0.0;
  double lo = 0.0, hi = 0.0;
  std::vector<double> choices;

  static ValueDist make_constant(double v) { return {Kind::Constant, v, 0, 0, {}}; }
  static ValueDist make_uniform(double lo, double hi) {
    return {Kind::Uniform, 0, lo, hi, {}};
  }
  // inclusive integer range
  static ValueDist make_uniform_int(double lo, double hi) {
    return {Kind::UniformInt, 0, lo, hi, {}};
  }
  static ValueDist make_choice(std::vector<double> vs) {
    return {Kind::Choice, 0, 0, 0, std::move(vs)};
  }

  double sample(Rng& rng) const {
    switch (kind) {
      case Kind::Constant: return constant;
      case Kind::Uniform: return rng.uniform(lo, hi);
      case Kind::UniformInt:
        return lo + static_cast<double>(
                        rng.next_below(static_cast<std::uint64_t>(hi - lo) + 1));
      case Kind::Choice: return choices[rng.next_below(choices.size())];
    }
    return 0.0;
  }

  double min_value() const {
    switch (kind) {
      case Kind::Constant: return constant;
      case Kind::Uniform:
      case Kind::UniformInt: return lo;
      case Kind::Choice: {
        double m = choices.empty() ? 0.0 : choices[0];
        for (double v : choices) m = std::min(m, v);
        return m;
      }
    }
    return 0.0;
  }
  double max_value() const {
    switch (kind) {
      case Kind::Constant: return constant;
      case Kind::Uniform:
      case Kind::UniformInt: return hi;
      case Kind::Choice: {
        double m = choices.empty() ? 0.0 : choices[0];
        for (double v : choices) m = std::max(m, v);
        return m;
      }
    }
    return 0.0;
  }
};

struct SyntheticSpec {
  std::uint32_t n_records = 0;
  ValueDist duration_us;
  ValueDist bw_tbps;

  void validate(const pricing::GpuModel& gpu) const {
    if (n_records == 0) fail(ErrorCode::BadSpec, "n_records must be positive");
    if (duration_us.min_value() <= 0) {
      fail(ErrorCode::BadSpec, "durations must be positive");
    }
    if ((duration_us.kind == ValueDist::Kind::Uniform ||
         duration_us.kind == ValueDist::Kind::UniformInt) &&
        duration_us.lo > duration_us.hi) {
      fail(ErrorCode::BadSpec, "duration range inverted");
    }
    if (bw_tbps.min_value() < 0 ||
        bw_tbps.max_value() > gpu.bw_max_tbps * (1.0 + pricing::kBwRelTol)) {
      fail(ErrorCode::BadSpec, "bandwidth outside [0, gpu peak]");
    }
    if ((bw_tbps.kind == ValueDist::Kind::Uniform ||
         bw_tbps.kind == ValueDist::Kind::UniformInt) &&
        bw_tbps.lo > bw_tbps.hi) {
      fail(ErrorCode::BadSpec, "bandwidth range inverted");
    }
    if ((duration_us.kind == ValueDist::Kind::Choice &&
         duration_us.choices.empty()) ||
        (bw_tbps.kind == ValueDist::Kind::Choice && bw_tbps.choices.empty())) {
      fail(ErrorCode::BadSpec, "empty choice list");
    }
  }
};

inline Trace gen_synthetic_trace(const SyntheticSpec& spec,
                                 const pricing::GpuModel& gpu,
                                 std::uint64_t seed) {
  spec.validate(gpu);
  Rng rng(seed);
  Trace t;
  t.gpu = gpu.name;
  t.records.reserve(spec.n_records);
  for (std::uint32_t i = 0; i < spec.n_records; ++i) {
    UtilizationRecord r;
    r.duration_us = spec.duration_us.sample(rng);
    r.bw_tbps = std::min(spec.bw_tbps.sample(rng), gpu.bw_max_tbps);
    r.dram_util = r.bw_tbps / gpu.bw_max_tbps;
    r.compute_util = rng.next_double();
    t.records.push_back(std::move(r));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Jobs and distributions
// ---------------------------------------------------------------------------

struct LlmJobParams {
  std::string model_name;
  std::uint64_t batch = 64;  // maximally utilizes bandwidth during decode
  std::uint64_t context = 1024;
  std::uint64_t output_tokens = 32;
};

// A job either references pre-built traces (one per GPU it can run on) or
// names an LLM decode configuration whose trace is derived analytically for
// whatever GPU is requested.
struct JobSpec {
  enum class Kind : std::uint8_t { TraceFile, LlmDecode };
  Kind kind = Kind::TraceFile;
  std::string name;

  // TraceFile: gpu name -> trace
  std::map<std::string, Trace> traces;

  // LlmDecode
  LlmJobParams llm;
  std::shared_ptr<const LlmModelConfig> model;

  bool has_binding(const std::string& gpu_name) const {
    if (kind == Kind::LlmDecode) return true;
    return traces.count(gpu_name) != 0;
  }
};

struct JobDistribution {
  struct Entry {
    JobSpec job;
    double weight = 0.0;
  };
  std::vector<Entry> entries;

  void validate() const {
    if (entries.empty()) fail(ErrorCode::BadSpec, "distribution has no entries");
    double total = 0.0;
    for (const auto& e : entries) {
      if (e.weight < 0) fail(ErrorCode::BadSpec, "negative weight");
      total += e.weight;
    }
    if (!(total > 0)) fail(ErrorCode::BadSpec, "weights sum to zero");
  }
};

// Categorical draw proportional to weights; advances `rng`.
inline size_t sample_job_index(const JobDistribution& dist, Rng& rng) {
  dist.validate();
  double total = 0.0;
  for (const auto& e : dist.entries) total += e.weight;
  const double x = rng.next_double() * total;
  double acc = 0.0;
  for (size_t i = 0; i < dist.entries.size(); ++i) {
    acc += dist.entries[i].weight;
    if (x < acc) return i;
  }
  return dist.entries.size() - 1;
}

inline const JobSpec& sample_job(const JobDistribution& dist, Rng& rng) {
  return dist.entries[sample_job_index(dist, rng)].job;
}

// Resolve the trace a job runs on a given GPU. LLM traces are derived on
// demand; callers that price many draws should cache by (entry, gpu).
inline Trace job_trace(const JobSpec& job, const pricing::GpuModel& gpu) {
  if (job.kind == JobSpec::Kind::TraceFile) {
    auto it = job.traces.find(gpu.name);
    if (it == job.traces.end()) {
      fail(ErrorCode::MissingTraceBinding,
           "job '" + job.name + "' has no trace for gpu '" + gpu.name + "'");
    }
    return it->second;
  }
  if (!job.model) {
    fail(ErrorCode::MissingTraceBinding,
         "job '" + job.name + "' references unresolved model '" +
             job.llm.model_name + "'");
  }
  return llm_decode_trace(*job.model, gpu, job.llm.batch, job.llm.context,
                          job.llm.output_tokens);
}

// Default context mix: powers of two over the padded range seen in public
// inference datasets.
inline std::vector<std::uint64_t> default_context_sizes() {
  return {1024, 2048, 4096, 8192};
}

}  // namespace agora::workload
