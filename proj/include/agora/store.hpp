#pragma once

// The collector's rolling-frame store. One directory per (customer, rental,
// node, gpu) stream holds an append-only index plus one body file per log;
// truncation deletes body files beyond the newest n, headers are kept
// forever, so billing is invariant under any truncation schedule.
//
// Billing export is write-ahead: the invoice file (with its line items) is
// persisted before PAID markers go to the indexes, and reload re-applies
// markers from invoices, so a crash between the two steps cannot double-bill.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agora/billing.hpp"
#include "agora/error.hpp"
#include "agora/frame.hpp"
#include "agora/money.hpp"

namespace agora::collect {

struct StreamKey {
  std::uint64_t customer_id = 0;
  std::uint64_t rental_id = 0;
  std::uint32_t node_id = 0;
  std::uint8_t gpu_id = 0;

  auto operator<=>(const StreamKey&) const = default;

  std::string str() const {
    return "c" + std::to_string(customer_id) + "/r" + std::to_string(rental_id) +
           "/n" + std::to_string(node_id) + "-g" + std::to_string(gpu_id);
  }
};

struct StoredLog {
  billing::LogHeader header;
  std::uint64_t payload_bytes = 0;
  bool has_body = true;
  bool paid = false;
};

struct ArrivalRecord {
  std::string run_label;
  StreamKey stream;
  std::uint64_t log_seq = 0;
  std::uint64_t bytes = 0;
  std::uint64_t send_ts_us = 0;
  std::uint64_t arrival_ts_us = 0;
  std::int64_t latency_us = 0;
};

struct InvoiceLine {
  std::uint64_t rental_id = 0;
  std::uint32_t node_id = 0;
  std::uint8_t gpu_id = 0;
  std::uint64_t log_seq = 0;
  Nanodollars amount = 0;
};

struct Invoice {
  std::string invoice_id;
  std::uint64_t customer_id = 0;
  std::uint64_t window_start_us = 0;
  std::uint64_t window_end_us = 0;
  Nanodollars total = 0;
  std::vector<InvoiceLine> lines;  // ordered by (rental, node, gpu, seq)
};

struct IngestResult {
  billing::AckStatus status = billing::AckStatus::Ok;
  bool stored = false;
  bool duplicate = false;
};

inline nlohmann::json invoice_to_json(const Invoice& inv) {
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& l : inv.lines) {
    lines.push_back({{"rental_id", l.rental_id},
                     {"node_id", l.node_id},
                     {"gpu_id", l.gpu_id},
                     {"log_seq", l.log_seq},
                     {"amount_nanos", l.amount}});
  }
  return {{"invoice_id", inv.invoice_id},
          {"customer_id", inv.customer_id},
          {"window_start_us", inv.window_start_us},
          {"window_end_us", inv.window_end_us},
          {"total_nanos", inv.total},
          {"lines", lines}};
}

inline std::string invoice_to_csv(const Invoice& inv) {
  std::ostringstream out;
  out << "customer_id,rental_id,node_id,gpu_id,log_seq,amount_nanos\n";
  for (const auto& l : inv.lines) {
    out << inv.customer_id << ',' << l.rental_id << ',' << l.node_id << ','
        << static_cast<unsigned>(l.gpu_id) << ',' << l.log_seq << ','
        << l.amount << "\n";
  }
  return out.str();
}

class RollingStore {
 public:
  using KeyLookup =
      std::function<const billing::AeadKey*(std::uint64_t customer_id)>;

  RollingStore(std::filesystem::path root, size_t truncate_n,
               std::string run_label)
      : root_(std::move(root)),
        truncate_n_(truncate_n),
        run_label_(std::move(run_label)) {
    std::filesystem::create_directories(root_);
    std::filesystem::create_directories(root_ / "invoices");
    load();
  }

  IngestResult ingest_frame(const billing::WireFrame& frame,
                            const KeyLookup& keys,
                            std::uint64_t arrival_ts_us) {
    std::lock_guard<std::mutex> lock(mu_);
    IngestResult res;

    std::uint64_t send_ts = 0;
    billing::SealedLog sealed;
    try {
      std::tie(send_ts, sealed) = billing::split_frame_payload(frame.payload);
    } catch (const Error&) {
      res.status = billing::AckStatus::Malformed;
      return res;
    }

    const StreamKey key{frame.customer_id, frame.rental_id, frame.node_id,
                        frame.gpu_id};
    record_arrival(key, frame.log_seq, frame.payload.size(), send_ts,
                   arrival_ts_us);

    const billing::AeadKey* aead = keys(frame.customer_id);
    if (!aead) {
      res.status = billing::AckStatus::UnknownCustomer;
      return res;
    }

    billing::LogHeader header;
    try {
      auto [h, samples] = billing::decrypt_log(sealed, *aead);
      header = h;
    } catch (const Error& e) {
      res.status = e.code() == ErrorCode::AuthFailure
                       ? billing::AckStatus::AuthFailure
                       : billing::AckStatus::Malformed;
      return res;
    }

    // Routing fields must agree with the authenticated header.
    if (header.customer_id != frame.customer_id ||
        header.rental_id != frame.rental_id ||
        header.node_id != frame.node_id || header.gpu_id != frame.gpu_id ||
        header.log_seq != frame.log_seq) {
      res.status = billing::AckStatus::AuthFailure;
      return res;
    }

    auto& stream = streams_[key];
    if (stream.logs.count(header.log_seq)) {
      res.status = billing::AckStatus::Ok;
      res.duplicate = true;
      return res;
    }

    const auto dir = stream_dir(key);
    std::filesystem::create_directories(dir);
    write_file(dir / body_name(header.log_seq), sealed.to_bytes());
    StoredLog log;
    log.header = header;
    log.payload_bytes = frame.payload.size();
    append_index(key, "LOG " + std::to_string(header.log_seq) + " " +
                          std::to_string(header.amount) + " " +
                          std::to_string(header.date_us) + " " +
                          std::to_string(header.start_ts_us) + " " +
                          std::to_string(header.period_us) + " " +
                          std::to_string(header.sample_count) + " " +
                          std::to_string(log.payload_bytes));
    stream.logs.emplace(header.log_seq, std::move(log));
    truncate_locked(key);

    res.status = billing::AckStatus::Ok;
    res.stored = true;
    return res;
  }

  // Drops body files beyond the newest truncate_n; headers stay.
  size_t truncate_rolling(const StreamKey& key) {
    std::lock_guard<std::mutex> lock(mu_);
    return truncate_locked(key);
  }

  Invoice billing_export(std::uint64_t customer_id, std::uint64_t window_start_us,
                         std::uint64_t window_end_us) {
    std::lock_guard<std::mutex> lock(mu_);
    Invoice inv;
    inv.customer_id = customer_id;
    inv.window_start_us = window_start_us;
    inv.window_end_us = window_end_us;
    inv.invoice_id = "inv-" + std::to_string(customer_id) + "-" +
                     std::to_string(window_start_us) + "-" +
                     std::to_string(window_end_us) + "-" +
                     std::to_string(invoice_counter_++);

    std::vector<std::pair<StreamKey, std::uint64_t>> to_mark;
    for (auto& [key, stream] : streams_) {
      if (key.customer_id != customer_id) continue;
      for (auto& [seq, log] : stream.logs) {
        if (log.paid) continue;
        if (log.header.date_us < window_start_us ||
            log.header.date_us >= window_end_us) {
          continue;
        }
        inv.lines.push_back(
            {key.rental_id, key.node_id, key.gpu_id, seq, log.header.amount});
        inv.total += log.header.amount;
        to_mark.emplace_back(key, seq);
      }
    }
    if (inv.lines.empty()) return inv;

    // Write-ahead: persist the invoice, then flip the paid flags.
    const auto path = root_ / "invoices" / (inv.invoice_id + ".json");
    write_file(path, invoice_to_json(inv).dump(2) + "\n");
    for (const auto& [key, seq] : to_mark) {
      append_index(key, "PAID " + std::to_string(seq) + " " + inv.invoice_id);
      streams_[key].logs[seq].paid = true;
    }
    return inv;
  }

  void record_external_arrival(const ArrivalRecord& rec) {
    std::lock_guard<std::mutex> lock(mu_);
    arrivals_.push_back(rec);
    append_arrival(rec);
  }

  std::vector<ArrivalRecord> arrivals() const {
    std::lock_guard<std::mutex> lock(mu_);
    return arrivals_;
  }

  std::map<StreamKey, std::vector<StoredLog>> snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::map<StreamKey, std::vector<StoredLog>> out;
    for (const auto& [key, stream] : streams_) {
      auto& v = out[key];
      v.reserve(stream.logs.size());
      for (const auto& [seq, log] : stream.logs) v.push_back(log);
    }
    return out;
  }

  // Missing sequence numbers between the lowest and highest stored.
  std::vector<std::uint64_t> gaps(const StreamKey& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<std::uint64_t> out;
    auto it = streams_.find(key);
    if (it == streams_.end() || it->second.logs.empty()) return out;
    std::uint64_t expect = it->second.logs.begin()->first;
    for (const auto& [seq, log] : it->second.logs) {
      while (expect < seq) out.push_back(expect++);
      expect = seq + 1;
    }
    return out;
  }

  Nanodollars total_stored_amount() const {
    std::lock_guard<std::mutex> lock(mu_);
    Nanodollars total = 0;
    for (const auto& [key, stream] : streams_) {
      for (const auto& [seq, log] : stream.logs) total += log.header.amount;
    }
    return total;
  }

  size_t log_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    size_t n = 0;
    for (const auto& [key, stream] : streams_) n += stream.logs.size();
    return n;
  }

  std::vector<std::uint64_t> customers() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::set<std::uint64_t> ids;
    for (const auto& [key, stream] : streams_) ids.insert(key.customer_id);
    return {ids.begin(), ids.end()};
  }

  const std::filesystem::path& root() const { return root_; }
  const std::string& run_label() const { return run_label_; }

 private:
  struct StreamState {
    std::map<std::uint64_t, StoredLog> logs;  // keyed by seq, hence ordered
  };

  std::filesystem::path stream_dir(const StreamKey& key) const {
    return root_ / ("c" + std::to_string(key.customer_id)) /
           ("r" + std::to_string(key.rental_id)) /
           ("n" + std::to_string(key.node_id) + "-g" +
            std::to_string(key.gpu_id));
  }

  static std::string body_name(std::uint64_t seq) {
    return std::to_string(seq) + ".body";
  }

  static void write_file(const std::filesystem::path& path,
                         const std::string& data) {
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorCode::IoError, "cannot write " + tmp);
      out.write(data.data(), static_cast<std::streamsize>(data.size()));
      out.flush();
      if (!out) fail(ErrorCode::IoError, "short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
  }

  void append_index(const StreamKey& key, const std::string& line) {
    const auto dir = stream_dir(key);
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "index.log", std::ios::app);
    if (!out) fail(ErrorCode::IoError, "cannot append index for " + key.str());
    out << line << "\n";
    out.flush();
  }

  void record_arrival(const StreamKey& key, std::uint64_t seq,
                      std::uint64_t bytes, std::uint64_t send_ts,
                      std::uint64_t arrival_ts) {
    ArrivalRecord rec;
    rec.run_label = run_label_;
    rec.stream = key;
    rec.log_seq = seq;
    rec.bytes = bytes;
    rec.send_ts_us = send_ts;
    rec.arrival_ts_us = arrival_ts;
    rec.latency_us = static_cast<std::int64_t>(arrival_ts) -
                     static_cast<std::int64_t>(send_ts);
    arrivals_.push_back(rec);
    append_arrival(rec);
  }

  void append_arrival(const ArrivalRecord& rec) {
    const auto path = root_ / "arrivals.csv";
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) fail(ErrorCode::IoError, "cannot append arrivals.csv");
    if (fresh) {
      out << "run_label,customer_id,rental_id,node_id,gpu_id,log_seq,bytes,"
             "send_ts_us,arrival_ts_us,latency_us\n";
    }
    out << rec.run_label << ',' << rec.stream.customer_id << ','
        << rec.stream.rental_id << ',' << rec.stream.node_id << ','
        << static_cast<unsigned>(rec.stream.gpu_id) << ',' << rec.log_seq << ','
        << rec.bytes << ',' << rec.send_ts_us << ',' << rec.arrival_ts_us << ','
        << rec.latency_us << "\n";
    out.flush();
  }

  size_t truncate_locked(const StreamKey& key) {
    auto it = streams_.find(key);
    if (it == streams_.end()) return 0;
    auto& logs = it->second.logs;
    size_t with_body = 0;
    for (const auto& [seq, log] : logs) {
      if (log.has_body) ++with_body;
    }
    if (with_body <= truncate_n_) return 0;
    size_t to_drop = with_body - truncate_n_;
    size_t dropped = 0;
    for (auto& [seq, log] : logs) {  // ascending seq: oldest first
      if (dropped == to_drop) break;
      if (!log.has_body) continue;
      std::error_code ec;
      std::filesystem::remove(stream_dir(key) / body_name(seq), ec);
      log.has_body = false;
      append_index(key, "TRUNC " + std::to_string(seq));
      ++dropped;
    }
    return dropped;
  }

  void load() {
    namespace fs = std::filesystem;
    for (const auto& c : fs::directory_iterator(root_)) {
      if (!c.is_directory()) continue;
      const std::string cname = c.path().filename().string();
      if (cname.empty() || cname[0] != 'c') continue;
      for (const auto& r : fs::directory_iterator(c.path())) {
        if (!r.is_directory()) continue;
        for (const auto& s : fs::directory_iterator(r.path())) {
          if (!s.is_directory()) continue;
          load_stream(cname.substr(1), r.path().filename().string().substr(1),
                      s.path());
        }
      }
    }
    // Re-apply paid markers from persisted invoices (covers a crash between
    // invoice write-ahead and index marking).
    const auto inv_dir = root_ / "invoices";
    if (fs::exists(inv_dir)) {
      for (const auto& f : fs::directory_iterator(inv_dir)) {
        if (f.path().extension() != ".json") continue;
        apply_invoice_markers(f.path());
        ++invoice_counter_;
      }
    }
  }

  void load_stream(const std::string& customer, const std::string& rental,
                   const std::filesystem::path& dir) {
    const std::string leaf = dir.filename().string();  // n<id>-g<id>
    const auto dash = leaf.find("-g");
    if (leaf.empty() || leaf[0] != 'n' || dash == std::string::npos) return;
    StreamKey key;
    try {
      key.customer_id = std::stoull(customer);
      key.rental_id = std::stoull(rental);
      key.node_id = static_cast<std::uint32_t>(std::stoul(leaf.substr(1, dash - 1)));
      key.gpu_id = static_cast<std::uint8_t>(std::stoul(leaf.substr(dash + 2)));
    } catch (const std::exception&) {
      return;
    }
    std::ifstream in(dir / "index.log");
    if (!in) return;
    auto& stream = streams_[key];
    std::string word;
    while (in >> word) {
      if (word == "LOG") {
        StoredLog log;
        std::uint64_t seq;
        in >> seq >> log.header.amount >> log.header.date_us >>
            log.header.start_ts_us >> log.header.period_us >>
            log.header.sample_count >> log.payload_bytes;
        log.header.customer_id = key.customer_id;
        log.header.rental_id = key.rental_id;
        log.header.node_id = key.node_id;
        log.header.gpu_id = key.gpu_id;
        log.header.log_seq = seq;
        log.has_body = std::filesystem::exists(dir / body_name(seq));
        stream.logs[seq] = log;
      } else if (word == "TRUNC") {
        std::uint64_t seq;
        in >> seq;
        if (stream.logs.count(seq)) stream.logs[seq].has_body = false;
      } else if (word == "PAID") {
        std::uint64_t seq;
        std::string invoice_id;
        in >> seq >> invoice_id;
        if (stream.logs.count(seq)) stream.logs[seq].paid = true;
      }
    }
  }

  void apply_invoice_markers(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return;
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      return;
    }
    if (!j.contains("lines") || !j.contains("customer_id")) return;
    const auto customer = j["customer_id"].get<std::uint64_t>();
    const auto invoice_id = j.value("invoice_id", std::string("?"));
    for (const auto& l : j["lines"]) {
      StreamKey key{customer, l["rental_id"].get<std::uint64_t>(),
                    l["node_id"].get<std::uint32_t>(),
                    static_cast<std::uint8_t>(l["gpu_id"].get<unsigned>())};
      const auto seq = l["log_seq"].get<std::uint64_t>();
      auto it = streams_.find(key);
      if (it == streams_.end() || !it->second.logs.count(seq)) continue;
      auto& log = it->second.logs[seq];
      if (!log.paid) {
        append_index(key, "PAID " + std::to_string(seq) + " " + invoice_id);
        log.paid = true;
      }
    }
  }

  std::filesystem::path root_;
  size_t truncate_n_;
  std::string run_label_;
  mutable std::mutex mu_;
  std::map<StreamKey, StreamState> streams_;
  std::vector<ArrivalRecord> arrivals_;
  std::uint64_t invoice_counter_ = 0;
};

// ---------------------------------------------------------------------------
// Capacity estimation and latency reporting
// ---------------------------------------------------------------------------

struct CapacityEstimate {
  double bytes_per_second = 0.0;
  double bits_per_second = 0.0;
  double bytes_per_year = 0.0;

  double gbit_per_second() const { return bits_per_second / 1e9; }
  double pib_per_year() const {
    return bytes_per_year / 1125899906842624.0;  // 1024^5
  }
};

inline CapacityEstimate estimate_capacity(std::uint64_t nodes,
                                          std::uint64_t gpus_per_node,
                                          std::uint64_t period_us,
                                          std::uint64_t sample_bytes) {
  if (nodes == 0 || gpus_per_node == 0 || period_us == 0 || sample_bytes == 0) {
    fail(ErrorCode::BadArgs, "all capacity inputs must be positive");
  }
  CapacityEstimate e;
  const double samples_per_second = 1e6 / static_cast<double>(period_us);
  e.bytes_per_second = static_cast<double>(nodes) *
                       static_cast<double>(gpus_per_node) * samples_per_second *
                       static_cast<double>(sample_bytes);
  e.bits_per_second = e.bytes_per_second * 8.0;
  e.bytes_per_year = e.bytes_per_second * 31536000.0;  // 365 * 86400
  return e;
}

struct LatencyStats {
  std::string run_label;
  size_t count = 0;
  std::int64_t min_us = 0;
  double mean_us = 0.0;
  std::int64_t p50_us = 0;
  std::int64_t p99_us = 0;
  std::int64_t max_us = 0;
};

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
inline std::int64_t nearest_rank(const std::vector<std::int64_t>& sorted,
                                 double pct) {
  const size_t n = sorted.size();
  size_t rank = static_cast<size_t>(
      std::ceil(pct / 100.0 * static_cast<double>(n)));
  if (rank == 0) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

inline std::vector<LatencyStats> latency_report(
    const std::vector<ArrivalRecord>& arrivals) {
  if (arrivals.empty()) fail(ErrorCode::Empty, "no arrival records");
  std::map<std::string, std::vector<std::int64_t>> by_label;
  for (const auto& a : arrivals) by_label[a.run_label].push_back(a.latency_us);
  std::vector<LatencyStats> out;
  for (auto& [label, lats] : by_label) {
    std::sort(lats.begin(), lats.end());
    LatencyStats s;
    s.run_label = label;
    s.count = lats.size();
    s.min_us = lats.front();
    s.max_us = lats.back();
    double sum = 0.0;
    for (auto v : lats) sum += static_cast<double>(v);
    s.mean_us = sum / static_cast<double>(lats.size());
    s.p50_us = nearest_rank(lats, 50.0);
    s.p99_us = nearest_rank(lats, 99.0);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string latency_report_csv(const std::vector<LatencyStats>& stats) {
  std::ostringstream out;
  out << "run_label,count,min_us,mean_us,p50_us,p99_us,max_us\n";
  for (const auto& s : stats) {
    out << s.run_label << ',' << s.count << ',' << s.min_us << ',' << s.mean_us
        << ',' << s.p50_us << ',' << s.p99_us << ',' << s.max_us << "\n";
  }
  return out.str();
}

}  // namespace agora::collect
