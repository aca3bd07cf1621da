#pragma once

// Emulated 8-GPU metering node. Per GPU, a sampler thread walks the bound
// trace at the configured period, prices each quantized counter reading
// through the FBP curve, and accumulates integer nanodollars into the open
// log. Sealed logs are journaled to disk before they are eligible to send,
// and a single sender thread per node transmits them in per-stream sequence
// order, deleting journal entries only on collector ack. Sampling never
// touches the network, so collector outages cost retries, not billing data.

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "agora/billing.hpp"
#include "agora/error.hpp"
#include "agora/frame.hpp"
#include "agora/money.hpp"
#include "agora/net.hpp"
#include "agora/pricing.hpp"
#include "agora/trace.hpp"

namespace agora::node {

enum class ClockMode : std::uint8_t { Realtime, Accelerated, Logical };

struct GpuAssignment {
  std::uint8_t gpu_id = 0;
  std::uint64_t customer_id = 0;
  std::uint64_t rental_id = 0;
  workload::Trace trace;
};

struct NodeConfig {
  std::uint32_t node_id = 0;
  net::Endpoint collector;
  std::vector<GpuAssignment> gpus;
  std::uint32_t period_us = 50;
  ClockMode clock = ClockMode::Logical;
  double accel_factor = 1.0;
  pricing::FbpCurve curve = pricing::build_fbp(1.0, {{1.0, 1.0}});
  std::uint32_t max_samples = billing::kDefaultMaxSamples;
  size_t queue_capacity = 64;
  std::filesystem::path journal_dir;
  std::map<std::uint64_t, billing::AeadKey> keys;  // per customer
  // 0 = retry forever; otherwise give up after this long with nothing
  // deliverable and report the backlog as undelivered.
  std::uint64_t max_send_wait_ms = 0;

  void validate() const {
    if (gpus.empty() || gpus.size() > 8) {
      fail(ErrorCode::ConfigError, "node must host between 1 and 8 gpus");
    }
    if (period_us == 0) fail(ErrorCode::ConfigError, "period must be > 0");
    if (clock == ClockMode::Accelerated && accel_factor <= 0) {
      fail(ErrorCode::ConfigError, "acceleration factor must be positive");
    }
    if (journal_dir.empty()) fail(ErrorCode::ConfigError, "journal_dir unset");
    std::vector<std::uint8_t> ids;
    for (const auto& g : gpus) {
      if (g.trace.records.empty()) {
        fail(ErrorCode::ConfigError,
             "gpu " + std::to_string(g.gpu_id) + " has an empty trace");
      }
      if (!keys.count(g.customer_id)) {
        fail(ErrorCode::ConfigError,
             "no key for customer " + std::to_string(g.customer_id));
      }
      ids.push_back(g.gpu_id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      fail(ErrorCode::ConfigError, "duplicate gpu_id");
    }
  }
};

struct GpuStats {
  std::uint8_t gpu_id = 0;
  std::uint64_t samples_emitted = 0;
  std::uint64_t logs_sealed = 0;
  Nanodollars total_amount = 0;
};

struct NodeStats {
  std::vector<GpuStats> gpus;
  std::uint64_t logs_sent = 0;
  std::uint64_t retries = 0;
  std::uint64_t rejected = 0;     // negative-acked, not retryable
  std::uint64_t undelivered = 0;  // left in the journal at give-up

  Nanodollars total_amount() const {
    Nanodollars t = 0;
    for (const auto& g : gpus) t += g.total_amount;
    return t;
  }
};

// Walks a trace at a fixed period; tick i reads the record active at time
// i*period (left endpoint). The emitted values are a pure function of the
// trace; pacing belongs to the caller's clock.
class ReplaySampler {
 public:
  ReplaySampler(const workload::Trace& trace, std::uint32_t period_us)
      : trace_(trace),
        period_us_(period_us),
        total_us_(trace.total_duration_us()) {
    if (period_us == 0) fail(ErrorCode::BadArgs, "period must be > 0");
    if (trace.records.empty()) fail(ErrorCode::EmptyTrace, "empty trace");
  }

  std::optional<billing::TelemetrySample> next() {
    const double t = static_cast<double>(tick_) * period_us_;
    if (t >= total_us_) return std::nullopt;
    const auto& recs = trace_.records;
    while (rec_index_ + 1 < recs.size() &&
           rec_start_ + recs[rec_index_].duration_us <= t) {
      rec_start_ += recs[rec_index_].duration_us;
      ++rec_index_;
    }
    ++tick_;
    const auto& r = recs[rec_index_];
    billing::TelemetrySample s;
    s.bw_mbps = workload::bw_to_mbps(r.bw_tbps);
    s.compute_util = workload::util_to_u16(r.compute_util);
    s.dram_util = workload::util_to_u16(r.dram_util);
    return s;
  }

  std::uint64_t tick_index() const { return tick_; }

 private:
  const workload::Trace& trace_;
  std::uint32_t period_us_;
  double total_us_;
  std::uint64_t tick_ = 0;
  size_t rec_index_ = 0;
  double rec_start_ = 0.0;
};

// On-disk queue of sealed-but-unacknowledged logs. One file per log named
// g<gpu>_s<seq>.sealed; an entry is removed only after the collector acks.
class SpillJournal {
 public:
  explicit SpillJournal(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail(ErrorCode::JournalFull, "cannot create journal " + dir_.string());
  }

  struct Entry {
    std::uint8_t gpu_id = 0;
    std::uint64_t seq = 0;

    auto operator<=>(const Entry&) const = default;
  };

  void put(std::uint8_t gpu_id, std::uint64_t seq, const std::string& bytes) {
    const auto path = entry_path(gpu_id, seq);
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorCode::JournalFull, "cannot write journal entry");
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      out.flush();
      if (!out) fail(ErrorCode::JournalFull, "short journal write");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::JournalFull, "cannot commit journal entry");
  }

  std::string read(const Entry& e) const {
    std::ifstream in(entry_path(e.gpu_id, e.seq), std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "missing journal entry");
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return bytes;
  }

  void remove(const Entry& e) {
    std::error_code ec;
    std::filesystem::remove(entry_path(e.gpu_id, e.seq), ec);
  }

  // Sequence high-water mark per gpu. Acked entries leave the journal, so the
  // next log_seq after a node restart must come from here, not from pending();
  // reusing a sequence number would be silently dropped by collector dedupe.
  std::uint64_t next_seq(std::uint8_t gpu_id) const {
    std::ifstream in(seq_path(gpu_id));
    std::uint64_t v = 0;
    if (in) in >> v;
    return v;
  }

  void store_next_seq(std::uint8_t gpu_id, std::uint64_t next) {
    const auto path = seq_path(gpu_id);
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) fail(ErrorCode::JournalFull, "cannot write seq file");
      out << next << "\n";
      out.flush();
      if (!out) fail(ErrorCode::JournalFull, "short seq write");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::JournalFull, "cannot commit seq file");
  }

  // Sorted by (gpu, seq) so per-stream send order is preserved.
  std::vector<Entry> pending() const {
    std::vector<Entry> out;
    std::error_code ec;
    for (const auto& f :
         std::filesystem::directory_iterator(dir_, ec)) {
      const std::string name = f.path().filename().string();
      if (name.size() < 4 || name[0] != 'g') continue;
      if (f.path().extension() != ".sealed") continue;
      const auto us = name.find("_s");
      if (us == std::string::npos) continue;
      Entry e;
      try {
        e.gpu_id = static_cast<std::uint8_t>(std::stoul(name.substr(1, us - 1)));
        e.seq = std::stoull(name.substr(us + 2));
      } catch (const std::exception&) {
        continue;
      }
      out.push_back(e);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  bool empty() const { return pending().empty(); }

 private:
  std::filesystem::path entry_path(std::uint8_t gpu_id, std::uint64_t seq) const {
    return dir_ / ("g" + std::to_string(gpu_id) + "_s" + std::to_string(seq) +
                   ".sealed");
  }

  std::filesystem::path seq_path(std::uint8_t gpu_id) const {
    return dir_ / ("g" + std::to_string(gpu_id) + ".seq");
  }

  std::filesystem::path dir_;
};

namespace detail {

struct SealNotice {
  std::uint8_t gpu_id = 0;
  std::uint64_t seq = 0;
};

struct SharedState {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<SealNotice> queue;
  size_t capacity = 64;
  std::atomic<bool> samplers_done{false};

  // Overflow drops the notice, never the log: the journal scan picks it up.
  void notify(SealNotice n) {
    {
      std::lock_guard<std::mutex> lock(mu);
      if (queue.size() < capacity) queue.push_back(n);
    }
    cv.notify_one();
  }
};

}  // namespace detail

inline NodeStats run_node(const NodeConfig& cfg) {
  cfg.validate();
  SpillJournal journal(cfg.journal_dir);
  detail::SharedState shared;
  shared.capacity = cfg.queue_capacity;

  NodeStats stats;
  stats.gpus.resize(cfg.gpus.size());

  const bool realtime = cfg.clock == ClockMode::Realtime;
  const std::uint64_t epoch_us = realtime ? net::wall_clock_us() : 0;
  const double tick_wall_us =
      cfg.clock == ClockMode::Logical
          ? 0.0
          : static_cast<double>(cfg.period_us) /
                (cfg.clock == ClockMode::Accelerated ? cfg.accel_factor : 1.0);

  auto sampler_fn = [&](size_t gi) {
    const GpuAssignment& gpu = cfg.gpus[gi];
    GpuStats& gs = stats.gpus[gi];
    gs.gpu_id = gpu.gpu_id;
    const billing::AeadKey& key = cfg.keys.at(gpu.customer_id);
    billing::LogStream stream(gpu.customer_id, gpu.rental_id, cfg.node_id,
                              gpu.gpu_id, cfg.period_us,
                              journal.next_seq(gpu.gpu_id));
    ReplaySampler sampler(gpu.trace, cfg.period_us);

    const std::uint64_t start_wall = net::steady_clock_us();
    std::optional<billing::LogBuilder> builder;

    auto seal_current = [&] {
      if (!builder || builder->sample_count() == 0) return;
      gs.total_amount += builder->header().amount;
      ++gs.logs_sealed;
      const std::uint64_t seq = builder->header().log_seq;
      // seq high-water first: a crash between the two writes leaves a
      // detectable gap rather than a reused sequence number
      journal.store_next_seq(gpu.gpu_id, stream.next_seq());
      journal.put(gpu.gpu_id, seq, builder->seal(key, cfg.max_samples).to_bytes());
      shared.notify({gpu.gpu_id, seq});
      builder.reset();
    };

    while (auto sample = sampler.next()) {
      const std::uint64_t tick = sampler.tick_index() - 1;
      if (!builder) {
        builder.emplace(stream.open(epoch_us + tick * cfg.period_us));
      }
      const double bw_tbps = workload::mbps_to_tbps(sample->bw_mbps);
      const Nanodollars inc = tick_increment_nanos(
          cfg.curve.price_per_hour(bw_tbps), cfg.period_us);
      builder->append_sample(*sample, inc);
      ++gs.samples_emitted;
      if (builder->sample_count() >= cfg.max_samples) seal_current();

      if (tick_wall_us > 0.0) {
        const auto target = start_wall + static_cast<std::uint64_t>(
                                             (tick + 1) * tick_wall_us);
        const std::uint64_t now = net::steady_clock_us();
        if (target > now + 200) {
          std::this_thread::sleep_for(std::chrono::microseconds(target - now));
        }
      }
    }
    seal_current();
  };

  auto sender_fn = [&] {
    net::Socket sock;
    std::uint64_t backoff_ms = 10;
    std::uint64_t idle_since_ms = 0;
    const auto now_ms = [] { return net::steady_clock_us() / 1000; };

    while (true) {
      auto pending = journal.pending();
      if (pending.empty()) {
        if (shared.samplers_done) break;
        std::unique_lock<std::mutex> lock(shared.mu);
        shared.cv.wait_for(lock, std::chrono::milliseconds(20));
        shared.queue.clear();
        continue;
      }

      if (!sock.valid()) {
        sock = net::connect_to(cfg.collector.host, cfg.collector.port);
        if (!sock.valid()) {
          ++stats.retries;
          if (cfg.max_send_wait_ms > 0 && shared.samplers_done) {
            if (idle_since_ms == 0) idle_since_ms = now_ms();
            if (now_ms() - idle_since_ms >= cfg.max_send_wait_ms) {
              stats.undelivered += journal.pending().size();
              return;
            }
          }
          std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
          backoff_ms = std::min<std::uint64_t>(backoff_ms * 2, 500);
          continue;
        }
        backoff_ms = 10;
        idle_since_ms = 0;
      }

      bool conn_dead = false;
      for (const auto& entry : pending) {
        const GpuAssignment* gpu = nullptr;
        for (const auto& g : cfg.gpus) {
          if (g.gpu_id == entry.gpu_id) gpu = &g;
        }
        if (!gpu) {
          journal.remove(entry);  // stale entry from another config
          continue;
        }
        billing::WireFrame frame;
        frame.customer_id = gpu->customer_id;
        frame.rental_id = gpu->rental_id;
        frame.node_id = cfg.node_id;
        frame.gpu_id = entry.gpu_id;
        frame.log_seq = entry.seq;
        std::string payload;
        billing::detail::put_u64_be(payload, net::wall_clock_us());
        payload += journal.read(entry);
        frame.payload = std::move(payload);
        std::string ack_buf(billing::kAckBytes, '\0');
        if (!sock.send_all(billing::encode_frame(frame)) ||
            !sock.recv_all(ack_buf.data(), ack_buf.size())) {
          sock.close();
          ++stats.retries;
          conn_dead = true;
          break;
        }
        const billing::Ack ack = billing::decode_ack(ack_buf);
        if (ack.node_id != cfg.node_id || ack.gpu_id != entry.gpu_id ||
            ack.log_seq != entry.seq) {
          sock.close();
          ++stats.retries;
          conn_dead = true;
          break;
        }
        if (ack.status == billing::AckStatus::Ok) {
          ++stats.logs_sent;
        } else {
          ++stats.rejected;  // auth/key failures do not fix themselves
        }
        journal.remove(entry);
      }
      if (conn_dead) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms = std::min<std::uint64_t>(backoff_ms * 2, 500);
      }
    }
  };

  std::vector<std::thread> samplers;
  samplers.reserve(cfg.gpus.size());
  for (size_t i = 0; i < cfg.gpus.size(); ++i) {
    samplers.emplace_back(sampler_fn, i);
  }
  std::thread sender(sender_fn);
  for (auto& t : samplers) t.join();
  shared.samplers_done = true;
  shared.cv.notify_all();
  sender.join();
  return stats;
}

}  // namespace agora::node
