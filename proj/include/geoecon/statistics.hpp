#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "geoecon/error.hpp"

namespace geoecon {

// Neumaier compensated accumulator. All statistics are summed through this in
// a fixed sequential order, so results do not depend on how work was split
// across threads.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double mean(std::span<const double> v) {
  if (v.empty()) throw ValidationError("mean of empty sequence");
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

// sample standard deviation, divisor n-1; identical samples give an exact 0
inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) throw ValidationError("sd needs at least 2 samples");
  bool constant = true;
  for (double x : v) constant = constant && (x == v.front());
  if (constant) return 0.0;
  const double m = mean(v);
  CompensatedSum s;
  for (double x : v) s.add((x - m) * (x - m));
  return std::sqrt(s.value() / static_cast<double>(v.size() - 1));
}

// linear interpolation between order statistics at position (n-1)p
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("quantile of empty sequence");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double pos = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || lo + 1 >= sorted.size()) return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct SummaryStats {
  double mean;
  double q1;
  double median;
  double q3;
  double sd;
};

inline SummaryStats summary_stats(std::span<const double> v) {
  if (v.size() < 2)
    throw ValidationError("summary statistics need at least 2 samples");
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  return SummaryStats{mean(v), quantile_sorted(sorted, 0.25),
                      quantile_sorted(sorted, 0.50),
                      quantile_sorted(sorted, 0.75), sample_sd(v)};
}

inline double mean_abs_error(std::span<const double> a,
                             std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw ValidationError("mean_abs_error: length mismatch or empty");
  CompensatedSum s;
  for (size_t i = 0; i < a.size(); ++i) s.add(std::abs(a[i] - b[i]));
  return s.value() / static_cast<double>(a.size());
}

// product-moment correlation; throws if either side is constant
inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ValidationError("pearson: length mismatch or fewer than 2 samples");
  const double ma = mean(a);
  const double mb = mean(b);
  CompensatedSum sab, saa, sbb;
  for (size_t i = 0; i < a.size(); ++i) {
    sab.add((a[i] - ma) * (b[i] - mb));
    saa.add((a[i] - ma) * (a[i] - ma));
    sbb.add((b[i] - mb) * (b[i] - mb));
  }
  const double va = saa.value();
  const double vb = sbb.value();
  if (va <= 0.0 || vb <= 0.0)
    throw ValidationError("pearson: constant input");
  return sab.value() / std::sqrt(va * vb);
}

}  // namespace geoecon
