#include "dcfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcfm/tensorlab/tensor.hpp"

namespace dcfm::metrics {

namespace {

void require_same_extent(std::span<const double> pred, std::span<const double> gt, const char* what) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw ShapeError(std::string(what) + ": prediction has " + std::to_string(pred.size()) +
                     " pixels, ground truth " + std::to_string(gt.size()));
  }
}

}  // namespace

int quantize_8bit(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<int>(std::floor(c * 255.0 + 0.5));
}

double mae(std::span<const double> pred, std::span<const double> gt) {
  require_same_extent(pred, gt, "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - gt[i]);
  return acc / static_cast<double>(pred.size());
}

FMeasure f_beta_max(std::span<const double> pred, std::span<const double> gt, double beta_sq) {
  require_same_extent(pred, gt, "f_beta_max");
  // Histogram of quantised levels split by ground-truth label; a cumulative
  // sum from the top gives TP and FP for every threshold in one pass.
  std::array<long, kThresholds> pos{}, neg{};
  long positives = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int q = quantize_8bit(pred[i]);
    if (gt[i] > 0.5) {
      ++pos[q];
      ++positives;
    } else {
      ++neg[q];
    }
  }
  if (positives == 0) throw UndefinedMetricError("f_beta_max: ground truth has no positive pixel");

  FMeasure out;
  long tp = 0, fp = 0;
  for (int t = kThresholds - 1; t >= 0; --t) {
    // Positive means level > t, so level t+1 joins when moving down to t.
    if (t + 1 < kThresholds) {
      tp += pos[t + 1];
      fp += neg[t + 1];
    }
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double denom = beta_sq * precision + recall;
    out.precision[t] = precision;
    out.recall[t] = recall;
    out.f_beta[t] = denom > 0.0 ? (1.0 + beta_sq) * precision * recall / denom : 0.0;
  }
  for (int t = 0; t < kThresholds; ++t) {
    if (out.f_beta[t] > out.f_beta_max) {
      out.f_beta_max = out.f_beta[t];
      out.best_threshold = t;
    }
  }
  return out;
}

MetricReport evaluate(std::span<const double> pred, std::span<const double> gt, double beta_sq) {
  return {mae(pred, gt), f_beta_max(pred, gt, beta_sq)};
}

}  // namespace dcfm::metrics
