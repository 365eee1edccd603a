#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace anchormix {

// Bad inputs, configs, caps. CLI exit code 2.
class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Degenerate arithmetic, failed chains, failed starts. CLI exit code 3.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112353;
inline constexpr double kSimplexTol = 1e-12;

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;  // all -inf (or a NaN propagates below)
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// x log x with the 0 log 0 = 0 convention.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

inline double median_of_sorted(std::span<const double> xs) {
  const size_t n = xs.size();
  if (n == 0) throw validation_error("median of empty sample");
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Linear-interpolation quantile on a sorted sample (R type 7).
inline double quantile_of_sorted(std::span<const double> xs, double p) {
  const size_t n = xs.size();
  if (n == 0) throw validation_error("quantile of empty sample");
  if (n == 1) return xs[0];
  double h = (static_cast<double>(n) - 1.0) * p;
  size_t lo = static_cast<size_t>(std::floor(h));
  if (lo >= n - 1) return xs[n - 1];
  double w = h - static_cast<double>(lo);
  return xs[lo] + w * (xs[lo + 1] - xs[lo]);
}

inline std::uint64_t factorial_u64(int k) {
  std::uint64_t f = 1;
  for (int i = 2; i <= k; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

}  // namespace anchormix
