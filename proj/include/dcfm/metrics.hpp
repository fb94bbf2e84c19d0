// Saliency evaluation: mean absolute error and maximum F-measure over 256
// binarisation thresholds of the 8-bit quantised prediction.

#pragma once

#include <array>
#include <span>
#include <stdexcept>

namespace dcfm::metrics {

inline constexpr double kDefaultBetaSq = 0.3;
inline constexpr int kThresholds = 256;

// Raised when F-measure is undefined (ground truth without positives).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Round-half-up to 0..255 after clamping to [0,1].
int quantize_8bit(double v);

double mae(std::span<const double> pred, std::span<const double> gt);

struct FMeasure {
  double f_beta_max = 0.0;
  int best_threshold = 0;
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};
  std::array<double, kThresholds> f_beta{};
};

// Threshold t in 0..255 marks a pixel positive when quantize_8bit(pred) > t.
// gt is binary (values > 0.5 count as positive).
FMeasure f_beta_max(std::span<const double> pred, std::span<const double> gt, double beta_sq = kDefaultBetaSq);

struct MetricReport {
  double mae = 0.0;
  FMeasure fmeasure;
};

MetricReport evaluate(std::span<const double> pred, std::span<const double> gt, double beta_sq = kDefaultBetaSq);

}  // namespace dcfm::metrics
