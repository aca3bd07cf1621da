#pragma once

// Analytical LLM decode model. Per generated token the GPU must stream the
// model weights once and the KV cache for every context position, and spend
// 2 flops per weight per batch element plus the attention flops against the
// cache. Latency is the roofline max of the memory and compute terms, scaled
// by per-GPU achievable-efficiency factors.

#include <algorithm>
#include <cstdint>
#include <string>

#include "agora/error.hpp"
#include "agora/pricing.hpp"
#include "agora/trace.hpp"

namespace agora::workload {

enum class AttentionKind : std::uint8_t { Gqa, Mla };

struct LlmModelConfig {
  std::string name;
  double active_params = 0.0;  // parameters read per token (MoE: active only)
  double dtype_bytes = 2.0;
  std::uint32_t layers = 0;
  AttentionKind attention = AttentionKind::Gqa;
  // gqa
  std::uint32_t kv_heads = 0;
  std::uint32_t head_dim = 0;
  // mla
  std::uint32_t compressed_dim = 0;
  std::uint32_t rope_dim = 0;

  // KV cache entries per token per layer (K and V for GQA; the latent +
  // rope vector for MLA).
  double kv_elems_per_token_layer() const {
    if (attention == AttentionKind::Gqa) {
      return 2.0 * kv_heads * head_dim;
    }
    return static_cast<double>(compressed_dim) + rope_dim;
  }

  void validate() const {
    if (name.empty() || active_params <= 0 || dtype_bytes <= 0 || layers == 0) {
      fail(ErrorCode::BadArgs, "llm config '" + name + "' has empty fields");
    }
    if (attention == AttentionKind::Gqa && (kv_heads == 0 || head_dim == 0)) {
      fail(ErrorCode::BadArgs, "gqa config needs kv_heads and head_dim");
    }
    if (attention == AttentionKind::Mla && compressed_dim + rope_dim == 0) {
      fail(ErrorCode::BadArgs, "mla config needs compressed_dim or rope_dim");
    }
  }
};

struct DecodeStep {
  double latency_s = 0.0;
  double achieved_bw_tbps = 0.0;
  double flops = 0.0;
  double bytes_moved = 0.0;
  bool memory_bound = false;
};

inline DecodeStep llm_decode_step(const LlmModelConfig& model,
                                  const pricing::GpuModel& gpu,
                                  std::uint64_t batch, std::uint64_t context,
                                  double eff_bw, double eff_comp) {
  model.validate();
  if (batch < 1 || context < 1) {
    fail(ErrorCode::BadArgs, "batch and context must be >= 1");
  }
  if (!(eff_bw > 0 && eff_bw <= 1 && eff_comp > 0 && eff_comp <= 1)) {
    fail(ErrorCode::BadArgs, "efficiency factors must be in (0,1]");
  }

  const double kv_elems = model.kv_elems_per_token_layer();
  const double bytes_moved =
      model.active_params * model.dtype_bytes +
      static_cast<double>(batch) * static_cast<double>(context) * model.layers *
          kv_elems * model.dtype_bytes;
  const double flops =
      2.0 * model.active_params * static_cast<double>(batch) +
      2.0 * static_cast<double>(batch) * static_cast<double>(context) *
          model.layers * kv_elems;

  const double bw_bytes_per_s = gpu.bw_max_tbps * 1e12 * eff_bw;
  const double flops_per_s = gpu.compute_peak_tflops * 1e12 * eff_comp;
  const double mem_time = bytes_moved / bw_bytes_per_s;
  const double comp_time = flops / flops_per_s;

  DecodeStep s;
  s.bytes_moved = bytes_moved;
  s.flops = flops;
  s.memory_bound = mem_time >= comp_time;
  s.latency_s = std::max(mem_time, comp_time);
  s.achieved_bw_tbps = bytes_moved / s.latency_s / 1e12;
  return s;
}

inline DecodeStep llm_decode_step(const LlmModelConfig& model,
                                  const pricing::GpuModel& gpu,
                                  std::uint64_t batch, std::uint64_t context) {
  return llm_decode_step(model, gpu, batch, context, gpu.eff_bw, gpu.eff_comp);
}

// One record per generated token; the context grows as tokens are emitted.
inline Trace llm_decode_trace(const LlmModelConfig& model,
                              const pricing::GpuModel& gpu, std::uint64_t batch,
                              std::uint64_t context,
                              std::uint64_t output_tokens, double eff_bw,
                              double eff_comp) {
  if (output_tokens < 1) fail(ErrorCode::BadArgs, "output_tokens must be >= 1");
  Trace t;
  t.gpu = gpu.name;
  t.token_count = batch * output_tokens;
  t.records.reserve(output_tokens);
  for (std::uint64_t i = 0; i < output_tokens; ++i) {
    const DecodeStep s =
        llm_decode_step(model, gpu, batch, context + i, eff_bw, eff_comp);
    UtilizationRecord r;
    r.duration_us = s.latency_s * 1e6;
    r.bw_tbps = s.achieved_bw_tbps;
    r.compute_util =
        std::min(1.0, s.flops / (s.latency_s * gpu.compute_peak_tflops * 1e12));
    r.dram_util = std::min(1.0, s.achieved_bw_tbps / gpu.bw_max_tbps);
    t.records.push_back(std::move(r));
  }
  return t;
}

inline Trace llm_decode_trace(const LlmModelConfig& model,
                              const pricing::GpuModel& gpu, std::uint64_t batch,
                              std::uint64_t context,
                              std::uint64_t output_tokens) {
  return llm_decode_trace(model, gpu, batch, context, output_tokens, gpu.eff_bw,
                          gpu.eff_comp);
}

}  // namespace agora::workload
