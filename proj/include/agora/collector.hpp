#pragma once

// TCP ingestion front end for the rolling store. Many node connections, one
// store; each frame is decrypted, verified, persisted, and acked on the same
// connection. A malformed stream (bad magic/version, oversized length) drops
// the connection; auth and key failures are negative-acked and the stream
// continues.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "agora/billing.hpp"
#include "agora/error.hpp"
#include "agora/frame.hpp"
#include "agora/net.hpp"
#include "agora/store.hpp"

namespace agora::collect {

struct CollectorConfig {
  std::string listen_host = "127.0.0.1";
  std::uint16_t listen_port = 0;  // 0: ephemeral
  std::filesystem::path store_dir;
  std::filesystem::path key_dir;
  size_t truncate_n = 64;
  std::string run_label = "run";
};

class CollectorServer {
 public:
  explicit CollectorServer(CollectorConfig cfg)
      : cfg_(std::move(cfg)),
        store_(std::make_shared<RollingStore>(cfg_.store_dir, cfg_.truncate_n,
                                              cfg_.run_label)) {}

  ~CollectorServer() { stop(); }

  void start() {
    listener_ = net::Listener::open(cfg_.listen_host, cfg_.listen_port);
    stopping_ = false;
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    if (stopping_.exchange(true)) {
      if (accept_thread_.joinable()) accept_thread_.join();
      return;
    }
    listener_.close();
    if (accept_thread_.joinable()) accept_thread_.join();
    {
      std::lock_guard<std::mutex> lock(conn_mu_);
      for (auto& c : conns_) c->sock.close();
    }
    for (auto& c : conns_) {
      if (c->th.joinable()) c->th.join();
    }
    conns_.clear();
  }

  std::uint16_t port() const { return listener_.port(); }
  RollingStore& store() { return *store_; }
  std::shared_ptr<RollingStore> store_ptr() { return store_; }

  const billing::AeadKey* lookup_key(std::uint64_t customer_id) {
    std::lock_guard<std::mutex> lock(key_mu_);
    auto it = keys_.find(customer_id);
    if (it != keys_.end()) return &it->second;
    const auto path = cfg_.key_dir / (std::to_string(customer_id) + ".key");
    if (!std::filesystem::exists(path)) return nullptr;
    keys_[customer_id] = billing::load_key_file(path.string());
    return &keys_[customer_id];
  }

 private:
  struct Conn {
    net::Socket sock;
    std::thread th;
  };

  void accept_loop() {
    while (!stopping_) {
      net::Socket client = listener_.accept(100);
      if (!client.valid()) continue;
      auto conn = std::make_shared<Conn>();
      conn->sock = std::move(client);
      {
        std::lock_guard<std::mutex> lock(conn_mu_);
        conns_.push_back(conn);
      }
      conn->th = std::thread([this, conn] { serve(conn->sock); });
    }
  }

  void serve(net::Socket& sock) {
    std::string header(billing::kFrameHeaderBytes, '\0');
    while (!stopping_) {
      if (!sock.recv_all(header.data(), header.size())) return;
      billing::WireFrame frame;
      std::uint32_t payload_len = 0;
      try {
        payload_len = parse_header(header, frame);
      } catch (const Error&) {
        return;  // protocol breakdown: connection-level error
      }
      frame.payload.resize(payload_len);
      if (payload_len > 0 && !sock.recv_all(frame.payload.data(), payload_len)) {
        return;
      }
      const std::uint64_t arrival = net::wall_clock_us();
      const IngestResult res = store_->ingest_frame(
          frame, [this](std::uint64_t c) { return lookup_key(c); }, arrival);
      billing::Ack ack{frame.node_id, frame.gpu_id, frame.log_seq, res.status};
      if (!sock.send_all(billing::encode_ack(ack))) return;
      if (res.status == billing::AckStatus::Malformed) return;
    }
  }

  static std::uint32_t parse_header(const std::string& bytes,
                                    billing::WireFrame& frame) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (billing::detail::get_u32_be(p) != billing::kFrameMagic) {
      fail(ErrorCode::BadMagic, "bad frame magic");
    }
    if (p[4] != billing::kFrameVersion) {
      fail(ErrorCode::BadVersion, "bad frame version");
    }
    size_t off = 5;
    frame.customer_id = billing::detail::get_u64_be(p + off); off += 8;
    frame.rental_id = billing::detail::get_u64_be(p + off); off += 8;
    frame.node_id = billing::detail::get_u32_be(p + off); off += 4;
    frame.gpu_id = p[off]; off += 1;
    frame.log_seq = billing::detail::get_u64_be(p + off); off += 8;
    const std::uint32_t payload_len = billing::detail::get_u32_be(p + off);
    if (payload_len > billing::kMaxPayloadBytes) {
      fail(ErrorCode::Oversize, "payload length");
    }
    return payload_len;
  }

  CollectorConfig cfg_;
  std::shared_ptr<RollingStore> store_;
  net::Listener listener_;
  std::thread accept_thread_;
  std::atomic<bool> stopping_{true};
  std::mutex conn_mu_;
  std::vector<std::shared_ptr<Conn>> conns_;
  std::mutex key_mu_;
  std::map<std::uint64_t, billing::AeadKey> keys_;
};

}  // namespace agora::collect
