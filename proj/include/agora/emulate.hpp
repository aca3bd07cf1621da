#pragma once

// Single-host emulation: one collector plus k node agents on threads. An
// optional restart point stops the collector after a given number of stored
// logs and brings it back on the same port and store directory, which is how
// the delivery guarantees get exercised.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <thread>
#include <vector>

#include "agora/collector.hpp"
#include "agora/node.hpp"

namespace agora::emulate {

struct EmulationPlan {
  collect::CollectorConfig collector;
  std::vector<node::NodeConfig> nodes;
  // 0 = never; otherwise stop the collector once this many logs are stored,
  // pause briefly, and restart it on the same port.
  size_t restart_after_logs = 0;
  std::uint64_t restart_pause_ms = 200;
};

struct EmulationOutcome {
  std::vector<node::NodeStats> node_stats;
  std::uint16_t collector_port = 0;
  size_t restarts = 0;

  Nanodollars total_sealed() const {
    Nanodollars t = 0;
    for (const auto& s : node_stats) t += s.total_amount();
    return t;
  }
  std::uint64_t total_logs_sealed() const {
    std::uint64_t n = 0;
    for (const auto& s : node_stats) {
      for (const auto& g : s.gpus) n += g.logs_sealed;
    }
    return n;
  }
};

// Runs to completion: all nodes finish and drain their journals. The caller
// inspects/keeps the store via the returned collector handle.
inline EmulationOutcome run_emulation(
    EmulationPlan plan, std::unique_ptr<collect::CollectorServer>* out_server) {
  auto server = std::make_unique<collect::CollectorServer>(plan.collector);
  server->start();
  const std::uint16_t port = server->port();
  plan.collector.listen_port = port;
  for (auto& n : plan.nodes) {
    n.collector.host = plan.collector.listen_host;
    n.collector.port = port;
  }

  EmulationOutcome outcome;
  outcome.collector_port = port;
  outcome.node_stats.resize(plan.nodes.size());

  std::vector<std::thread> node_threads;
  node_threads.reserve(plan.nodes.size());
  for (size_t i = 0; i < plan.nodes.size(); ++i) {
    node_threads.emplace_back([&plan, &outcome, i] {
      outcome.node_stats[i] = node::run_node(plan.nodes[i]);
    });
  }

  std::atomic<bool> nodes_done{false};
  std::thread restarter;
  if (plan.restart_after_logs > 0) {
    restarter = std::thread([&] {
      while (!nodes_done) {
        if (server->store().log_count() >= plan.restart_after_logs) {
          server->stop();
          std::this_thread::sleep_for(
              std::chrono::milliseconds(plan.restart_pause_ms));
          server = std::make_unique<collect::CollectorServer>(plan.collector);
          server->start();
          ++outcome.restarts;
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
    });
  }

  for (auto& t : node_threads) t.join();
  nodes_done = true;
  if (restarter.joinable()) restarter.join();

  if (out_server) {
    *out_server = std::move(server);
  } else {
    server->stop();
  }
  return outcome;
}

}  // namespace agora::emulate
