#include "dcfm/pipeline/evaluation.hpp"

#include "dcfm/losses.hpp"
#include "dcfm/metrics.hpp"
#include "dcfm/tensorlab/tensor.hpp"

namespace dcfm::pipeline {

double soft_iou(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw ShapeError("soft_iou: size mismatch");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * gt[i];
    sp += pred[i];
    sg += gt[i];
  }
  if (sp == 0.0 && sg == 0.0) return 1.0;
  return inter / (sp + sg - inter + losses::kUnionEpsilon);
}

EvalSummary evaluate_groups(const Model& model, const std::vector<datagen::GroupSample>& groups) {
  EvalSummary s;
  for (const auto& g : groups) {
    const auto result = model.forward(images_to_tensor(g.images));
    for (std::size_t n = 0; n < g.masks.size(); ++n) {
      const auto pred = prediction_image(result.pred, n);
      const auto& gt = g.masks[n].pixels;
      s.soft_iou += soft_iou(pred.pixels, gt);
      s.mae += metrics::mae(pred.pixels, gt);
      try {
        s.fmax += metrics::f_beta_max(pred.pixels, gt).f_beta_max;
        ++s.fmax_images;
      } catch (const metrics::UndefinedMetricError&) {
      }
      ++s.images;
    }
  }
  if (s.images) {
    s.soft_iou /= static_cast<double>(s.images);
    s.mae /= static_cast<double>(s.images);
  }
  if (s.fmax_images) s.fmax /= static_cast<double>(s.fmax_images);
  return s;
}

}  // namespace dcfm::pipeline
