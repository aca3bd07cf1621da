#pragma once

#include <cmath>
#include <cstdint>

namespace agora {

// Charges are accumulated as integer nanodollars. Double math is confined to
// curve evaluation; every conversion into money rounds half-to-even so repeated
// per-sample rounding carries no bias.
using Nanodollars = std::int64_t;

constexpr double kNanosPerDollar = 1e9;
constexpr double kMicrosPerHour = 3600.0 * 1e6;

inline std::int64_t round_half_even(double x) {
  const double fl = std::floor(x);
  const double frac = x - fl;
  const auto base = static_cast<std::int64_t>(fl);
  if (frac > 0.5) return base + 1;
  if (frac < 0.5) return base;
  return (base % 2 == 0) ? base : base + 1;
}

inline Nanodollars dollars_to_nanos(double dollars) {
  return round_half_even(dollars * kNanosPerDollar);
}

inline double nanos_to_dollars(Nanodollars n) {
  return static_cast<double>(n) / kNanosPerDollar;
}

// One sampling tick at `ppt` dollars-per-hour for `period_us` microseconds.
// 1 $/h == 1e9 nano / 3.6e9 us, hence the /3.6.
inline Nanodollars tick_increment_nanos(double ppt_dollars_per_hour,
                                        std::uint64_t period_us) {
  return round_half_even(ppt_dollars_per_hour *
                         static_cast<double>(period_us) / 3.6);
}

}  // namespace agora
