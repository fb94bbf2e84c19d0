#include "dcfm/losses.hpp"

#include <vector>

#include "dcfm/tensorlab/ops.hpp"

namespace dcfm::losses {

tl::Tensor iou_loss(const tl::Tensor& pred, const tl::Tensor& gt) {
  if (pred.shape() != gt.shape() || pred.rank() != 4 || pred.dim(1) != 1) {
    throw ShapeError("iou_loss: prediction " + tl::to_string(pred.shape()) + " vs ground truth " +
                     tl::to_string(gt.shape()));
  }
  const std::size_t n = pred.dim(0), hw = pred.dim(2) * pred.dim(3);
  std::vector<double> ratio(n);
  std::vector<double> inter(n), uni(n);
  for (std::size_t i = 0; i < n; ++i) {
    double si = 0.0, sp = 0.0, sy = 0.0;
    for (std::size_t p = 0; p < hw; ++p) {
      const double a = pred[i * hw + p], b = gt[i * hw + p];
      si += a * b;
      sp += a;
      sy += b;
    }
    inter[i] = si;
    uni[i] = sp + sy - si;
    // Both empty: perfect agreement.
    ratio[i] = (sp == 0.0 && sy == 0.0) ? 1.0 : si / (uni[i] + kUnionEpsilon);
  }
  double acc = 0.0;
  for (double r : ratio) acc += r;
  const double value = 1.0 - acc / static_cast<double>(n);

  std::vector<double> y(gt.data().begin(), gt.data().end());
  std::vector<bool> degenerate(n);
  for (std::size_t i = 0; i < n; ++i) degenerate[i] = ratio[i] == 1.0 && uni[i] == 0.0;
  return tl::Tensor::make_result(
      {1}, {value}, {pred}, [n, hw, inter, uni, degenerate, y = std::move(y)](tl::detail::Node& self) {
        auto& g = self.inputs[0]->grad_buffer();
        const double scale = -self.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          if (degenerate[i]) continue;
          const double denom = uni[i] + kUnionEpsilon;
          const double inv_sq = 1.0 / (denom * denom);
          for (std::size_t p = 0; p < hw; ++p) {
            const double yj = y[i * hw + p];
            // d(I/(U+e))/dp = (y (U+e) - I (1 - y)) / (U+e)^2
            g[i * hw + p] += scale * (yj * denom - inter[i] * (1.0 - yj)) * inv_sq;
          }
        }
      });
}

tl::Tensor total_loss(const tl::Tensor& iou, const tl::Tensor& sc, double lambda) {
  return tl::add(iou, tl::scale(sc, lambda));
}

}  // namespace dcfm::losses
