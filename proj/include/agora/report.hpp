#pragma once

// CSV/JSON emission for revenue reports and sweep rows, plus the inverse
// parsers so emitted artifacts round-trip.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agora/econ.hpp"
#include "agora/error.hpp"

namespace agora::econ {

inline constexpr const char* kRevenueCsvHeader =
    "n_jobs,gpu,mean_tbp,mean_fbp,per_token_fbp,f_percent,seed";
inline constexpr const char* kSweepCsvHeader =
    "period_us,ideal_mean,real_mean,percent_error";

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace detail

inline std::string revenue_report_to_csv(const RevenueReport& r) {
  std::ostringstream out;
  out << kRevenueCsvHeader << "\n";
  for (const auto& [gpu, tbp] : r.mean_tbp) {
    out << r.n_jobs << ',' << gpu << ',' << detail::fmt(tbp) << ','
        << detail::fmt(r.mean_fbp) << ','
        << (r.per_token_fbp_nanos ? detail::fmt(*r.per_token_fbp_nanos) : "")
        << ',' << detail::fmt(r.f_percent) << ',' << r.seed << "\n";
  }
  return out.str();
}

inline nlohmann::json revenue_report_to_json(const RevenueReport& r) {
  nlohmann::json j;
  j["n_jobs"] = r.n_jobs;
  j["seed"] = r.seed;
  j["reference_gpu"] = r.reference_gpu;
  j["mean_tbp"] = r.mean_tbp;
  j["mean_fbp"] = r.mean_fbp;
  if (r.per_token_fbp_nanos) {
    j["per_token_fbp"] = *r.per_token_fbp_nanos;
  } else {
    j["per_token_fbp"] = nullptr;
  }
  j["f_percent"] = r.f_percent;
  return j;
}

inline RevenueReport revenue_report_from_json(const nlohmann::json& j) {
  try {
    RevenueReport r;
    r.n_jobs = j.at("n_jobs").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.reference_gpu = j.at("reference_gpu").get<std::string>();
    r.mean_tbp = j.at("mean_tbp").get<std::map<std::string, double>>();
    r.mean_fbp = j.at("mean_fbp").get<double>();
    if (!j.at("per_token_fbp").is_null()) {
      r.per_token_fbp_nanos = j.at("per_token_fbp").get<double>();
    }
    r.f_percent = j.at("f_percent").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Malformed, std::string("revenue report json: ") + e.what());
  }
}

inline std::string sweep_rows_to_csv(const std::vector<SamplingErrorRow>& rows) {
  std::ostringstream out;
  out << kSweepCsvHeader << "\n";
  for (const auto& r : rows) {
    out << r.period_us << ',' << detail::fmt(r.ideal_mean) << ','
        << detail::fmt(r.real_mean) << ',' << detail::fmt(r.percent_error)
        << "\n";
  }
  return out.str();
}

inline std::vector<SamplingErrorRow> sweep_rows_from_csv(
    const std::string& text) {
  std::vector<SamplingErrorRow> rows;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kSweepCsvHeader) {
        fail(ErrorCode::Malformed, "line 1: bad sweep header");
      }
      continue;
    }
    SamplingErrorRow r;
    std::istringstream ls(line);
    std::string f;
    try {
      std::getline(ls, f, ',');
      r.period_us = std::stoull(f);
      std::getline(ls, f, ',');
      r.ideal_mean = std::stod(f);
      std::getline(ls, f, ',');
      r.real_mean = std::stod(f);
      std::getline(ls, f, ',');
      r.percent_error = std::stod(f);
    } catch (const std::exception&) {
      fail(ErrorCode::Malformed, "line " + std::to_string(line_no) + ": bad row");
    }
    rows.push_back(r);
  }
  return rows;
}

inline nlohmann::json sweep_rows_to_json(
    const std::vector<SamplingErrorRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"period_us", r.period_us},
                   {"ideal_mean", r.ideal_mean},
                   {"real_mean", r.real_mean},
                   {"percent_error", r.percent_error}});
  }
  return arr;
}

}  // namespace agora::econ
