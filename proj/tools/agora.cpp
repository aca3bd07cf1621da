// agora — operator CLI for the feature-based pricing toolkit.
//
// Subcommands: econ, sweep, emulate, capacity, gen-traces, validate-curve,
// bill. Every run writes a manifest.json next to its outputs. Exit codes are
// stable for scripting: 0 success, 1 runtime failure, 2 configuration error.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agora/collector.hpp"
#include "agora/config.hpp"
#include "agora/econ.hpp"
#include "agora/emulate.hpp"
#include "agora/error.hpp"
#include "agora/node.hpp"
#include "agora/report.hpp"
#include "agora/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace agora;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct GlobalOpts {
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string label;
};

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::BadSpec:
    case ErrorCode::BadArgs:
    case ErrorCode::MissingTraceBinding:
      return kExitConfig;
    default:
      return kExitRuntime;
  }
}

void write_manifest(const fs::path& out, const std::string& subcommand,
                    json details, const GlobalOpts& g) {
  details["out"] = out.string();
  if (!g.label.empty()) details["label"] = g.label;
  if (g.seed) details["seed_override"] = *g.seed;
  config::write_manifest(out, subcommand, details);
}

// ---------------------------------------------------------------------------
// econ / sweep
// ---------------------------------------------------------------------------

int cmd_econ(const std::string& config_path, const GlobalOpts& g) {
  auto cfg = config::load_experiment(config_path);
  if (g.seed) cfg.seed = *g.seed;
  const auto report =
      cfg.tbp_gpus.empty()
          ? econ::run_experiment(cfg.distribution, cfg.curve, cfg.catalog,
                                 cfg.reference_gpu, cfg.n_jobs, cfg.seed)
          : econ::run_experiment(cfg.distribution, cfg.curve, cfg.catalog,
                                 cfg.reference_gpu, cfg.tbp_gpus, cfg.n_jobs,
                                 cfg.seed);
  const fs::path out(g.out);
  config::write_file(out / "report.csv", econ::revenue_report_to_csv(report));
  config::write_file(out / "report.json",
                     econ::revenue_report_to_json(report).dump(2) + "\n");
  write_manifest(out, "econ",
                 {{"config", config_path},
                  {"seed", report.seed},
                  {"n_jobs", report.n_jobs},
                  {"curve", cfg.curve.notation()}},
                 g);
  std::cout << "wrote " << (out / "report.json").string() << "\n"
            << "mean_fbp $" << report.mean_fbp << "/job, F% "
            << report.f_percent << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const GlobalOpts& g) {
  auto cfg = config::load_experiment(config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (cfg.periods_us.empty()) {
    fail(ErrorCode::ConfigError, "sweep needs a non-empty periods_us list");
  }
  const auto rows =
      econ::sampling_error_sweep(cfg.distribution, cfg.curve, cfg.catalog,
                                 cfg.reference_gpu, cfg.periods_us, cfg.n_jobs,
                                 cfg.seed);
  const fs::path out(g.out);
  config::write_file(out / "sweep.csv", econ::sweep_rows_to_csv(rows));
  config::write_file(out / "sweep.json",
                     econ::sweep_rows_to_json(rows).dump(2) + "\n");
  write_manifest(out, "sweep",
                 {{"config", config_path},
                  {"seed", cfg.seed},
                  {"n_jobs", cfg.n_jobs},
                  {"periods_us", cfg.periods_us}},
                 g);
  for (const auto& r : rows) {
    std::printf("%6lu us  ideal %.9f  real %.9f  error %+.3f%%\n",
                static_cast<unsigned long>(r.period_us), r.ideal_mean,
                r.real_mean, r.percent_error);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// capacity
// ---------------------------------------------------------------------------

int cmd_capacity(std::uint64_t nodes, std::uint64_t gpus, std::uint64_t period_us,
                 std::uint64_t sample_bytes) {
  const auto e = collect::estimate_capacity(nodes, gpus, period_us, sample_bytes);
  std::printf("%lu nodes x %lu gpus, %lu us period, %lu-byte samples\n",
              static_cast<unsigned long>(nodes), static_cast<unsigned long>(gpus),
              static_cast<unsigned long>(period_us),
              static_cast<unsigned long>(sample_bytes));
  if (e.bytes_per_second < 1e6) {
    std::printf("  %.0f B/s", e.bytes_per_second);
  } else {
    std::printf("  %.2f MB/s", e.bytes_per_second / 1e6);
  }
  std::printf("  =  %.2f Gbit/s\n", e.gbit_per_second());
  std::printf("  %.1f PiB/year if stored naively\n", e.pib_per_year());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// validate-curve
// ---------------------------------------------------------------------------

int cmd_validate_curve(const std::string& curve_path,
                       const std::string& catalog_path) {
  const auto catalog = config::load_catalog(catalog_path);
  const auto curve = config::load_curve(curve_path, /*checked=*/false);
  const auto report = pricing::validate_desiderata(curve, catalog);
  json j;
  j["curve"] = curve.notation();
  j["monotone"] = report.monotone;
  j["caps_respected"] = report.caps_respected;
  j["convex"] = report.convex;
  j["violations"] = report.violations;
  std::cout << j.dump(2) << "\n";
  return report.structurally_ok() ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------------------
// gen-traces
// ---------------------------------------------------------------------------

int cmd_gen_traces(const std::string& config_path, const GlobalOpts& g) {
  const json j = config::parse_json_file(config_path);
  const auto catalog =
      config::load_catalog(config::resolve(config_path, j.at("catalog")));
  const std::string format = j.value("format", std::string("csv"));
  const fs::path out(g.out);
  fs::create_directories(out);
  json written = json::array();
  for (const auto& t : j.at("traces")) {
    const auto spec = config::synthetic_spec_from_json(t);
    const auto gpu_name = t.at("gpu").get<std::string>();
    std::uint64_t seed = t.value("seed", std::uint64_t{1});
    if (g.seed) seed ^= *g.seed;
    const auto trace =
        workload::gen_synthetic_trace(spec, catalog.by_name(gpu_name), seed);
    const std::string name = t.at("name").get<std::string>();
    fs::path file;
    if (format == "binary") {
      const auto period = j.at("period_us").get<std::uint32_t>();
      file = out / (name + "_" + gpu_name + ".bin");
      config::write_file(file, workload::serialize_trace_binary(trace, period));
    } else {
      file = out / (name + "_" + gpu_name + ".csv");
      config::write_file(file, workload::serialize_trace_csv(trace));
    }
    written.push_back({{"file", file.filename().string()},
                       {"records", trace.records.size()},
                       {"seed", seed}});
    std::cout << "wrote " << file.string() << "\n";
  }
  write_manifest(out, "gen-traces",
                 {{"config", config_path}, {"traces", written}}, g);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// emulate
// ---------------------------------------------------------------------------

std::atomic<bool> g_interrupted{false};

void handle_signal(int) { g_interrupted = true; }

// Clone a node template for replica i: distinct node_id and decorrelated
// synthetic trace seeds.
json replicated_node_json(const json& tmpl, std::uint32_t replica) {
  json nj = tmpl;
  nj["node_id"] = tmpl.at("node_id").get<std::uint32_t>() + replica;
  nj.erase("journal_dir");
  nj.erase("key_dir");
  if (nj.contains("gpus")) {
    for (auto& gpu : nj["gpus"]) {
      if (gpu.contains("synthetic")) {
        auto& s = gpu["synthetic"];
        s["seed"] = s.value("seed", std::uint64_t{1}) + 1000ull * replica;
      }
    }
  }
  return nj;
}

node::NodeConfig build_emulated_node(const json& tmpl, const fs::path& cfg_path,
                                     const pricing::GpuCatalog& catalog,
                                     std::uint32_t replica,
                                     const fs::path& out) {
  auto cfg = config::node_config_from_json(replicated_node_json(tmpl, replica),
                                           cfg_path, catalog);
  cfg.journal_dir = out / "journal" / ("node" + std::to_string(cfg.node_id));
  return cfg;
}

int run_role_collector(const fs::path& role_cfg, const std::string& listen) {
  const json j = config::parse_json_file(role_cfg);
  auto ccfg = config::collector_config_from_json(j, role_cfg);
  if (!listen.empty()) {
    const auto ep = net::Endpoint::parse(listen);
    ccfg.listen_host = ep.host;
    ccfg.listen_port = ep.port;
  }
  collect::CollectorServer server(ccfg);
  server.start();
  std::cout << "collector listening on " << ccfg.listen_host << ":"
            << server.port() << " (store " << ccfg.store_dir.string()
            << "); Ctrl-C to stop\n";
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  server.stop();
  return kExitOk;
}

int run_role_node(const fs::path& role_cfg, const pricing::GpuCatalog& catalog,
                  const std::string& collector) {
  auto cfg = config::load_node_config(role_cfg, catalog);
  if (!collector.empty()) cfg.collector = net::Endpoint::parse(collector);
  const auto stats = node::run_node(cfg);
  std::cout << "node " << cfg.node_id << ": sent " << stats.logs_sent
            << " logs, retries " << stats.retries << ", undelivered "
            << stats.undelivered << ", total "
            << nanos_to_dollars(stats.total_amount()) << " $\n";
  return stats.undelivered == 0 ? kExitOk : kExitRuntime;
}

int cmd_emulate(const std::string& config_path, const GlobalOpts& g,
                const std::string& role, bool print_commands,
                size_t restart_after_logs, const std::string& listen_override,
                const std::string& collector_override) {
  const fs::path cfg_path(config_path);
  const json j = config::parse_json_file(cfg_path);
  const auto catalog =
      config::load_catalog(config::resolve(cfg_path, j.at("catalog")));

  if (role == "collector") return run_role_collector(cfg_path, listen_override);
  if (role == "node") return run_role_node(cfg_path, catalog, collector_override);

  const fs::path out(g.out);
  fs::create_directories(out);

  // collector config: store and keys always live under the out dir
  collect::CollectorConfig ccfg;
  if (j.contains("collector")) {
    const auto& cj = j.at("collector");
    if (cj.contains("listen")) {
      const auto ep = net::Endpoint::parse(cj.at("listen").get<std::string>());
      ccfg.listen_host = ep.host;
      ccfg.listen_port = ep.port;
    }
    ccfg.truncate_n = cj.value("truncate_n", size_t{64});
    ccfg.run_label = cj.value("run_label", std::string("run"));
  }
  if (!g.label.empty()) ccfg.run_label = g.label;
  ccfg.store_dir = out / "store";
  ccfg.key_dir = out / "keys";

  // node configs: explicit list plus replicated template
  std::vector<node::NodeConfig> nodes;
  if (j.contains("nodes")) {
    for (const auto& nj : j.at("nodes")) {
      nodes.push_back(build_emulated_node(nj, cfg_path, catalog, 0, out));
    }
  }
  if (j.contains("node_template")) {
    const auto n = j.value("n_nodes", std::uint32_t{1});
    for (std::uint32_t i = 0; i < n; ++i) {
      nodes.push_back(
          build_emulated_node(j.at("node_template"), cfg_path, catalog, i, out));
    }
  }
  if (nodes.empty()) {
    fail(ErrorCode::ConfigError, "emulation has no nodes");
  }

  // provision per-customer keys
  fs::create_directories(ccfg.key_dir);
  for (auto& n : nodes) {
    for (const auto& gpu : n.gpus) {
      const auto key_path =
          ccfg.key_dir / (std::to_string(gpu.customer_id) + ".key");
      if (!fs::exists(key_path)) {
        billing::AeadKey key;
        billing::random_bytes(key.data(), key.size());
        billing::write_key_file(key_path.string(), key);
      }
      n.keys[gpu.customer_id] = billing::load_key_file(key_path.string());
    }
  }

  if (print_commands) {
    // Role configs are self-contained: inline curves, absolute paths.
    if (ccfg.listen_port == 0) ccfg.listen_port = 7461;
    const fs::path roles = out / "roles";
    const auto catalog_abs =
        fs::absolute(config::resolve(cfg_path, j.at("catalog"))).string();
    json cj = {{"listen", ccfg.listen_host + ":" + std::to_string(ccfg.listen_port)},
               {"store_dir", fs::absolute(out / "store").string()},
               {"key_dir", fs::absolute(ccfg.key_dir).string()},
               {"truncate_n", ccfg.truncate_n},
               {"run_label", ccfg.run_label},
               {"catalog", catalog_abs}};
    config::write_file(roles / "collector.json", cj.dump(2) + "\n");
    std::cout << "# on the collector host:\nagora emulate --role collector -c "
              << fs::absolute(roles / "collector.json").string() << "\n";
    size_t explicit_count = j.contains("nodes") ? j.at("nodes").size() : 0;
    for (size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      json njson =
          i < explicit_count
              ? replicated_node_json(j.at("nodes").at(i), 0)
              : replicated_node_json(j.at("node_template"),
                                     static_cast<std::uint32_t>(i - explicit_count));
      njson["collector"] =
          ccfg.listen_host + ":" + std::to_string(ccfg.listen_port);
      njson["curve"] = config::curve_to_json(n.curve);
      njson["journal_dir"] = fs::absolute(n.journal_dir).string();
      njson["key_dir"] = fs::absolute(ccfg.key_dir).string();
      njson["catalog"] = catalog_abs;
      const auto p = roles / ("node" + std::to_string(n.node_id) + ".json");
      config::write_file(p, njson.dump(2) + "\n");
      std::cout << "# on node host " << n.node_id
                << ":\nagora emulate --role node -c " << fs::absolute(p).string()
                << "\n";
    }
    return kExitOk;
  }

  emulate::EmulationPlan plan;
  plan.collector = ccfg;
  plan.nodes = std::move(nodes);
  plan.restart_after_logs = restart_after_logs;
  const size_t node_count = plan.nodes.size();

  std::unique_ptr<collect::CollectorServer> server;
  const auto outcome = emulate::run_emulation(std::move(plan), &server);
  auto& store = server->store();

  // exports: latency report, invoices, conservation summary
  const auto arrivals = store.arrivals();
  if (!arrivals.empty()) {
    config::write_file(out / "latency.csv",
                       collect::latency_report_csv(collect::latency_report(arrivals)));
  }
  Nanodollars invoiced = 0;
  for (const auto customer : store.customers()) {
    const auto inv = store.billing_export(customer, 0, UINT64_MAX);
    invoiced += inv.total;
    config::write_file(out / ("invoice_" + std::to_string(customer) + ".json"),
                       collect::invoice_to_json(inv).dump(2) + "\n");
    config::write_file(out / ("invoice_" + std::to_string(customer) + ".csv"),
                       collect::invoice_to_csv(inv));
  }

  json stats = json::array();
  std::uint64_t undelivered = 0;
  for (const auto& s : outcome.node_stats) {
    json gpus = json::array();
    for (const auto& gpu : s.gpus) {
      gpus.push_back({{"gpu_id", gpu.gpu_id},
                      {"samples", gpu.samples_emitted},
                      {"logs_sealed", gpu.logs_sealed},
                      {"amount_nanos", gpu.total_amount}});
    }
    stats.push_back({{"logs_sent", s.logs_sent},
                     {"retries", s.retries},
                     {"rejected", s.rejected},
                     {"undelivered", s.undelivered},
                     {"gpus", gpus}});
    undelivered += s.undelivered;
  }
  const Nanodollars sealed = outcome.total_sealed();
  const Nanodollars stored = store.total_stored_amount();
  json summary = {{"sealed_nanos", sealed},
                  {"stored_nanos", stored},
                  {"invoiced_nanos", invoiced},
                  {"conserved", sealed == stored && stored == invoiced},
                  {"undelivered", undelivered},
                  {"restarts", outcome.restarts},
                  {"streams", store.snapshot().size()},
                  {"logs", store.log_count()}};
  config::write_file(out / "node_stats.json", stats.dump(2) + "\n");
  config::write_file(out / "summary.json", summary.dump(2) + "\n");
  write_manifest(out, "emulate",
                 {{"config", config_path},
                  {"nodes", node_count},
                  {"restart_after_logs", restart_after_logs}},
                 g);
  std::cout << "sealed " << sealed << " stored " << stored << " invoiced "
            << invoiced << " nanodollars; conserved="
            << (summary["conserved"].get<bool>() ? "yes" : "no") << "\n";
  server->stop();
  return summary["conserved"].get<bool>() && undelivered == 0 ? kExitOk
                                                              : kExitRuntime;
}

// ---------------------------------------------------------------------------
// bill
// ---------------------------------------------------------------------------

int cmd_bill(const std::string& store_dir, std::uint64_t customer,
             std::uint64_t from_us, std::uint64_t to_us, const GlobalOpts& g) {
  collect::RollingStore store(store_dir, SIZE_MAX, "bill");
  const auto inv = store.billing_export(customer, from_us, to_us);
  const fs::path out(g.out);
  config::write_file(out / "invoice.json",
                     collect::invoice_to_json(inv).dump(2) + "\n");
  config::write_file(out / "invoice.csv", collect::invoice_to_csv(inv));
  write_manifest(out, "bill",
                 {{"store", store_dir},
                  {"customer", customer},
                  {"window", {from_us, to_us}},
                  {"total_nanos", inv.total}},
                 g);
  std::cout << "invoice " << inv.invoice_id << ": " << inv.lines.size()
            << " line items, total " << inv.total << " nanodollars ($"
            << nanos_to_dollars(inv.total) << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agora: feature-based GPU pricing simulator and metering pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override config seed");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--label", g.label, "run label for reports");

  std::string config_path;
  std::string curve_path, catalog_path;
  std::string store_dir;
  std::uint64_t nodes = 0, gpus = 0, period_us = 0, sample_bytes = 8;
  std::uint64_t customer = 0, from_us = 0, to_us = UINT64_MAX;
  std::string role = "all";
  bool print_commands = false;
  std::size_t restart_after_logs = 0;
  std::string listen_override, collector_override;

  auto* econ = app.add_subcommand("econ", "run a revenue experiment");
  econ->add_option("-c,--config", config_path, "experiment config json")->required();

  auto* sweep = app.add_subcommand("sweep", "sampling-period error sweep");
  sweep->add_option("-c,--config", config_path, "experiment config json")->required();

  auto* emulate_cmd =
      app.add_subcommand("emulate", "run collector plus node agents");
  emulate_cmd->add_option("-c,--config", config_path, "emulation config json")->required();
  emulate_cmd->add_option("--role", role, "all|collector|node")
      ->check(CLI::IsMember({"all", "collector", "node"}));
  emulate_cmd->add_flag("--print-commands", print_commands,
                        "write per-role configs and print launch commands");
  emulate_cmd->add_option("--restart-after-logs", restart_after_logs,
                          "stop and restart the collector after N stored logs");
  emulate_cmd->add_option("--listen", listen_override,
                          "collector role: override the listen address");
  emulate_cmd->add_option("--collector", collector_override,
                          "node role: override the collector address");

  auto* capacity = app.add_subcommand("capacity", "ingest volume estimate");
  capacity->add_option("nodes", nodes, "node count")->required();
  capacity->add_option("gpus", gpus, "gpus per node")->required();
  capacity->add_option("period_us", period_us, "sampling period, us")->required();
  capacity->add_option("sample_bytes", sample_bytes, "bytes per sample")
      ->capture_default_str();

  auto* gen = app.add_subcommand("gen-traces", "generate synthetic traces");
  gen->add_option("-c,--config", config_path, "generation config json")->required();

  auto* validate = app.add_subcommand("validate-curve", "check FBP desiderata");
  validate->add_option("--curve", curve_path, "curve json")->required();
  validate->add_option("--catalog", catalog_path, "gpu catalog json")->required();

  auto* bill = app.add_subcommand("bill", "export an invoice from a store");
  bill->add_option("--store", store_dir, "collector store directory")->required();
  bill->add_option("--customer", customer, "customer id")->required();
  bill->add_option("--from", from_us, "window start, us");
  bill->add_option("--to", to_us, "window end, us (exclusive)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    if (*econ) return cmd_econ(config_path, g);
    if (*sweep) return cmd_sweep(config_path, g);
    if (*emulate_cmd) {
      return cmd_emulate(config_path, g, role, print_commands, restart_after_logs,
                         listen_override, collector_override);
    }
    if (*capacity) return cmd_capacity(nodes, gpus, period_us, sample_bytes);
    if (*gen) return cmd_gen_traces(config_path, g);
    if (*validate) return cmd_validate_curve(curve_path, catalog_path);
    if (*bill) return cmd_bill(store_dir, customer, from_us, to_us, g);
  } catch (const Error& e) {
    std::cerr << "agora: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "agora: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
