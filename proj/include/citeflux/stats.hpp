#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "citeflux/errors.hpp"

namespace citeflux {

inline double mean_of(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("mean_of: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Median of a copy; even length averages the two middles.
inline double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median_of: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double pop_stddev(std::span<const double> v, double mean) {
  if (v.empty()) throw InvalidInput("pop_stddev: empty input");
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Linearly interpolated quantile, q in [0, 1].
inline double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) throw InvalidInput("quantile_of: empty input");
  if (q < 0.0 || q > 1.0) throw InvalidInput("quantile_of: q outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

}  // namespace citeflux
