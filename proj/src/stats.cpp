#include "fpfuse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fpfuse {

double percentile_nearest_rank(std::span<const double> sorted_values, double q) {
  if (sorted_values.empty()) {
    throw std::invalid_argument("percentile of empty series");
  }
  const auto n = sorted_values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted_values[rank - 1];
}

ErrorStats error_stats(std::span<const double> errors_m) {
  if (errors_m.empty()) {
    throw std::invalid_argument("error_stats: empty input");
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double e : errors_m) {
    if (!(e >= 0.0)) {
      throw std::invalid_argument("error_stats: negative or non-finite error");
    }
    sum += e;
    sum_sq += e * e;
  }
  const double n = static_cast<double>(errors_m.size());
  std::vector<double> sorted(errors_m.begin(), errors_m.end());
  std::sort(sorted.begin(), sorted.end());

  ErrorStats s;
  s.mean_m = sum / n;
  s.rms_m = std::sqrt(sum_sq / n);
  s.std_m = std::sqrt(std::max(0.0, sum_sq / n - s.mean_m * s.mean_m));
  s.p80_m = percentile_nearest_rank(sorted, 0.80);
  s.p95_m = percentile_nearest_rank(sorted, 0.95);
  s.max_m = sorted.back();
  return s;
}

CdfCurve cdf_curve(std::span<const double> errors_m) {
  if (errors_m.empty()) {
    throw std::invalid_argument("cdf_curve: empty input");
  }
  CdfCurve c;
  c.value_m.assign(errors_m.begin(), errors_m.end());
  std::sort(c.value_m.begin(), c.value_m.end());
  const double n = static_cast<double>(c.value_m.size());
  c.prob.resize(c.value_m.size());
  for (std::size_t i = 0; i < c.value_m.size(); ++i) {
    c.prob[i] = static_cast<double>(i + 1) / n;
  }
  c.prob.back() = 1.0;
  return c;
}

CorrelationResult correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("correlation: series must be equal length >= 2");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  CorrelationResult r;
  if (saa <= 1e-24 || sbb <= 1e-24) {
    r.degenerate = true;
    r.coefficient = 0.0;
    return r;
  }
  r.coefficient = sab / (std::sqrt(saa) * std::sqrt(sbb));
  r.coefficient = std::clamp(r.coefficient, -1.0, 1.0);
  return r;
}

}  // namespace fpfuse
