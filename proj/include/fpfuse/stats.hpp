#pragma once

#include <span>
#include <vector>

namespace fpfuse {

// Location-error statistics in meters, matching the usual reporting columns.
struct ErrorStats {
  double std_m = 0.0;
  double mean_m = 0.0;
  double rms_m = 0.0;
  double p80_m = 0.0;
  double p95_m = 0.0;
  double max_m = 0.0;
};

struct CdfCurve {
  std::vector<double> value_m;  // sorted ascending
  std::vector<double> prob;     // i/n, last element exactly 1
};

// Nearest-rank percentile: value at the ceil(q*n)-th smallest, 1-indexed.
double percentile_nearest_rank(std::span<const double> sorted_values, double q);

// Throws std::invalid_argument on empty input or any negative entry.
ErrorStats error_stats(std::span<const double> errors_m);

CdfCurve cdf_curve(std::span<const double> errors_m);

struct CorrelationResult {
  double coefficient = 0.0;
  // Either series had (numerically) zero variance; coefficient is reported
  // as 0 so constant predictors still fill a table row.
  bool degenerate = false;
};

// Pearson correlation between two equal-length series (n >= 2).
CorrelationResult correlation(std::span<const double> a, std::span<const double> b);

}  // namespace fpfuse
