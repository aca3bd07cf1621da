#pragma once

// JSON configuration loading for every file format the CLI accepts, plus the
// run manifest every subcommand writes next to its outputs. Relative paths
// inside a config resolve against that config file's directory.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agora/collector.hpp"
#include "agora/error.hpp"
#include "agora/llm.hpp"
#include "agora/node.hpp"
#include "agora/pricing.hpp"
#include "agora/trace.hpp"
#include "agora/workload.hpp"

namespace agora::config {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ConfigError, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const fs::path& path, const std::string& data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

inline json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

inline fs::path resolve(const fs::path& base_file, const std::string& ref) {
  fs::path p(ref);
  if (p.is_absolute()) return p;
  return base_file.parent_path() / p;
}

// ---------------------------------------------------------------------------
// GPU catalog (Table-2 shaped rows)
// ---------------------------------------------------------------------------

inline pricing::GpuCatalog load_catalog(const fs::path& path) {
  const json j = parse_json_file(path);
  try {
    std::vector<pricing::GpuModel> models;
    for (const auto& m : j.at("models")) {
      pricing::GpuModel g;
      g.name = m.at("name").get<std::string>();
      g.ppt_dollars_per_hour = m.at("price_per_hour").get<double>();
      g.bw_max_tbps = m.at("bandwidth_tbps").get<double>();
      g.compute_peak_tflops = m.at("compute_100tflops").get<double>() * 100.0;
      g.eff_bw = m.value("eff_bw", 0.8);
      g.eff_comp = m.value("eff_comp", 0.8);
      models.push_back(std::move(g));
    }
    return pricing::GpuCatalog(std::move(models));
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Pricing curve
// ---------------------------------------------------------------------------

inline pricing::FbpCurve curve_from_json(const json& j, bool checked = true) {
  try {
    std::vector<pricing::CurveSegment> segments;
    for (const auto& s : j.at("segments")) {
      segments.push_back(
          {s.at("bw_tbps").get<double>(), s.at("cap").get<double>()});
    }
    const double base = j.at("base").get<double>();
    return checked ? pricing::FbpCurve::build(base, std::move(segments))
                   : pricing::FbpCurve::unchecked(base, std::move(segments));
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("curve: ") + e.what());
  }
}

inline json curve_to_json(const pricing::FbpCurve& curve) {
  json segments = json::array();
  for (const auto& s : curve.segments()) {
    segments.push_back({{"bw_tbps", s.bw_upper_tbps}, {"cap", s.cap_dollars_per_hour}});
  }
  return {{"base", curve.base()}, {"segments", segments}};
}

inline pricing::FbpCurve load_curve(const fs::path& path, bool checked = true) {
  return curve_from_json(parse_json_file(path), checked);
}

// ---------------------------------------------------------------------------
// LLM model configs
// ---------------------------------------------------------------------------

inline workload::LlmModelConfig load_llm_model(const fs::path& path) {
  const json j = parse_json_file(path);
  try {
    workload::LlmModelConfig m;
    m.name = j.at("name").get<std::string>();
    m.active_params = j.at("active_params").get<double>();
    m.dtype_bytes = j.at("dtype_bytes").get<double>();
    m.layers = j.at("layers").get<std::uint32_t>();
    const auto& att = j.at("attention");
    const auto kind = att.at("kind").get<std::string>();
    if (kind == "gqa") {
      m.attention = workload::AttentionKind::Gqa;
      m.kv_heads = att.at("kv_heads").get<std::uint32_t>();
      m.head_dim = att.at("head_dim").get<std::uint32_t>();
    } else if (kind == "mla") {
      m.attention = workload::AttentionKind::Mla;
      m.compressed_dim = att.at("compressed_dim").get<std::uint32_t>();
      m.rope_dim = att.at("rope_dim").get<std::uint32_t>();
    } else {
      fail(ErrorCode::ConfigError, path.string() + ": unknown attention kind");
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic trace specs
// ---------------------------------------------------------------------------

inline workload::ValueDist value_dist_from_json(const json& j) {
  if (j.is_number()) return workload::ValueDist::make_constant(j.get<double>());
  if (j.contains("constant")) {
    return workload::ValueDist::make_constant(j.at("constant").get<double>());
  }
  if (j.contains("uniform")) {
    const auto& u = j.at("uniform");
    return workload::ValueDist::make_uniform(u.at(0).get<double>(),
                                             u.at(1).get<double>());
  }
  if (j.contains("uniform_int")) {
    const auto& u = j.at("uniform_int");
    return workload::ValueDist::make_uniform_int(u.at(0).get<double>(),
                                                 u.at(1).get<double>());
  }
  if (j.contains("choice")) {
    return workload::ValueDist::make_choice(
        j.at("choice").get<std::vector<double>>());
  }
  fail(ErrorCode::ConfigError,
       "distribution must be constant/uniform/uniform_int/choice");
}

inline workload::SyntheticSpec synthetic_spec_from_json(const json& j) {
  try {
    workload::SyntheticSpec s;
    s.n_records = j.at("n_records").get<std::uint32_t>();
    s.duration_us = value_dist_from_json(j.at("duration_us"));
    s.bw_tbps = value_dist_from_json(j.at("bw_tbps"));
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("synthetic spec: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Traces and job distributions
// ---------------------------------------------------------------------------

inline workload::Trace load_trace(const fs::path& path,
                                  const pricing::GpuCatalog& catalog,
                                  const std::string& gpu_name) {
  const std::string bytes = read_file(path);
  if (path.extension() == ".bin" || path.extension() == ".atrc") {
    return workload::parse_trace_binary(bytes, catalog);
  }
  return workload::parse_trace_csv(bytes, catalog.by_name(gpu_name));
}

inline workload::JobDistribution load_distribution(
    const fs::path& path, const pricing::GpuCatalog& catalog) {
  const json j = parse_json_file(path);
  workload::JobDistribution dist;
  std::map<std::string, std::shared_ptr<const workload::LlmModelConfig>> models;
  try {
    size_t index = 0;
    for (const auto& e : j.at("entries")) {
      workload::JobDistribution::Entry entry;
      entry.weight = e.at("weight").get<double>();
      const auto& job = e.at("job");
      const auto kind = job.at("kind").get<std::string>();
      entry.job.name = job.value("name", "job" + std::to_string(index));
      if (kind == "trace-file") {
        entry.job.kind = workload::JobSpec::Kind::TraceFile;
        for (const auto& [gpu, ref] : job.at("traces").items()) {
          entry.job.traces[gpu] =
              load_trace(resolve(path, ref.get<std::string>()), catalog, gpu);
        }
      } else if (kind == "llm-decode") {
        entry.job.kind = workload::JobSpec::Kind::LlmDecode;
        const auto model_file = job.at("model_file").get<std::string>();
        auto it = models.find(model_file);
        if (it == models.end()) {
          it = models
                   .emplace(model_file,
                            std::make_shared<const workload::LlmModelConfig>(
                                load_llm_model(resolve(path, model_file))))
                   .first;
        }
        entry.job.model = it->second;
        entry.job.llm.model_name = it->second->name;
        entry.job.llm.batch = job.value("batch", std::uint64_t{64});
        entry.job.llm.context = job.at("context").get<std::uint64_t>();
        entry.job.llm.output_tokens = job.at("output_tokens").get<std::uint64_t>();
      } else {
        fail(ErrorCode::ConfigError, path.string() + ": unknown job kind '" + kind + "'");
      }
      dist.entries.push_back(std::move(entry));
      ++index;
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  dist.validate();
  return dist;
}

// ---------------------------------------------------------------------------
// Experiment configs
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  workload::JobDistribution distribution;
  pricing::FbpCurve curve = pricing::build_fbp(1.0, {{1.0, 1.0}});
  pricing::GpuCatalog catalog;
  std::string reference_gpu;
  std::vector<std::string> tbp_gpus;
  std::uint64_t n_jobs = 10000;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> periods_us;
};

inline ExperimentConfig load_experiment(const fs::path& path) {
  const json j = parse_json_file(path);
  ExperimentConfig cfg;
  try {
    cfg.catalog = load_catalog(resolve(path, j.at("catalog").get<std::string>()));
    cfg.curve = load_curve(resolve(path, j.at("curve").get<std::string>()));
    cfg.distribution = load_distribution(
        resolve(path, j.at("distribution").get<std::string>()), cfg.catalog);
    cfg.reference_gpu = j.at("reference_gpu").get<std::string>();
    if (j.contains("tbp_gpus")) {
      cfg.tbp_gpus = j.at("tbp_gpus").get<std::vector<std::string>>();
    }
    cfg.n_jobs = j.value("n_jobs", std::uint64_t{10000});
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("periods_us")) {
      cfg.periods_us = j.at("periods_us").get<std::vector<std::uint64_t>>();
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  if (!cfg.catalog.contains(cfg.reference_gpu)) {
    fail(ErrorCode::ConfigError,
         "reference gpu '" + cfg.reference_gpu + "' not in catalog");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Node / collector / emulation configs
// ---------------------------------------------------------------------------

inline fs::path key_dir_override(const fs::path& configured) {
  if (const char* env = std::getenv("AGORA_KEY_DIR")) return fs::path(env);
  return configured;
}

inline std::map<std::uint64_t, billing::AeadKey> load_keys_for(
    const std::vector<node::GpuAssignment>& gpus, const fs::path& key_dir) {
  std::map<std::uint64_t, billing::AeadKey> keys;
  for (const auto& g : gpus) {
    if (keys.count(g.customer_id)) continue;
    const auto path = key_dir / (std::to_string(g.customer_id) + ".key");
    if (!fs::exists(path)) {
      fail(ErrorCode::ConfigError,
           "no key file for customer " + std::to_string(g.customer_id) +
               " under " + key_dir.string());
    }
    keys[g.customer_id] = billing::load_key_file(path.string());
  }
  return keys;
}

inline node::NodeConfig node_config_from_json(const json& j,
                                              const fs::path& base_file,
                                              const pricing::GpuCatalog& catalog) {
  node::NodeConfig cfg;
  try {
    cfg.node_id = j.at("node_id").get<std::uint32_t>();
    if (j.contains("collector")) {
      cfg.collector = net::Endpoint::parse(j.at("collector").get<std::string>());
    }
    cfg.period_us = j.value("period_us", std::uint32_t{50});
    if (j.contains("clock")) {
      const auto mode = j.at("clock").at("mode").get<std::string>();
      if (mode == "realtime") {
        cfg.clock = node::ClockMode::Realtime;
      } else if (mode == "accelerated") {
        cfg.clock = node::ClockMode::Accelerated;
        cfg.accel_factor = j.at("clock").at("factor").get<double>();
      } else if (mode == "logical") {
        cfg.clock = node::ClockMode::Logical;
      } else {
        fail(ErrorCode::ConfigError, "unknown clock mode '" + mode + "'");
      }
    }
    if (j.at("curve").is_string()) {
      cfg.curve = load_curve(resolve(base_file, j.at("curve").get<std::string>()));
    } else {
      cfg.curve = curve_from_json(j.at("curve"));
    }
    cfg.max_samples = j.value("max_samples", billing::kDefaultMaxSamples);
    cfg.queue_capacity = j.value("queue_capacity", size_t{64});
    if (j.contains("journal_dir")) {
      cfg.journal_dir = resolve(base_file, j.at("journal_dir").get<std::string>());
    }
    cfg.max_send_wait_ms = j.value("max_send_wait_ms", std::uint64_t{0});
    for (const auto& g : j.at("gpus")) {
      node::GpuAssignment a;
      a.gpu_id = static_cast<std::uint8_t>(g.at("gpu_id").get<unsigned>());
      a.customer_id = g.at("customer_id").get<std::uint64_t>();
      a.rental_id = g.at("rental_id").get<std::uint64_t>();
      const auto gpu_name = g.at("gpu").get<std::string>();
      if (g.contains("trace")) {
        a.trace = load_trace(resolve(base_file, g.at("trace").get<std::string>()),
                             catalog, gpu_name);
      } else if (g.contains("synthetic")) {
        const auto spec = synthetic_spec_from_json(g.at("synthetic"));
        const auto seed = g.at("synthetic").value("seed", std::uint64_t{1});
        a.trace = workload::gen_synthetic_trace(spec, catalog.by_name(gpu_name), seed);
      } else {
        fail(ErrorCode::ConfigError, "gpu entry needs 'trace' or 'synthetic'");
      }
      cfg.gpus.push_back(std::move(a));
    }
    if (j.contains("key_dir")) {
      const auto key_dir =
          key_dir_override(resolve(base_file, j.at("key_dir").get<std::string>()));
      cfg.keys = load_keys_for(cfg.gpus, key_dir);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, base_file.string() + ": " + e.what());
  }
  return cfg;
}

inline node::NodeConfig load_node_config(const fs::path& path,
                                         const pricing::GpuCatalog& catalog) {
  auto cfg = node_config_from_json(parse_json_file(path), path, catalog);
  cfg.validate();
  return cfg;
}

inline collect::CollectorConfig collector_config_from_json(
    const json& j, const fs::path& base_file) {
  collect::CollectorConfig cfg;
  try {
    if (j.contains("listen")) {
      const auto ep = net::Endpoint::parse(j.at("listen").get<std::string>());
      cfg.listen_host = ep.host;
      cfg.listen_port = ep.port;
    }
    cfg.store_dir = resolve(base_file, j.at("store_dir").get<std::string>());
    cfg.key_dir =
        key_dir_override(resolve(base_file, j.at("key_dir").get<std::string>()));
    cfg.truncate_n = j.value("truncate_n", size_t{64});
    cfg.run_label = j.value("run_label", std::string("run"));
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, base_file.string() + ": " + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

inline void write_manifest(const fs::path& out_dir, const std::string& subcommand,
                           const json& details) {
  json m;
  m["subcommand"] = subcommand;
  m["details"] = details;
  write_file(out_dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace agora::config
