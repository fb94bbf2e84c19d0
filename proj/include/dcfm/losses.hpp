#pragma once

#include "dcfm/tensorlab/tensor.hpp"

namespace dcfm::losses {

inline constexpr double kDefaultLambda = 0.1;
inline constexpr double kUnionEpsilon = 1e-8;

// Soft IoU loss over [N,1,H,W]: 1 - mean_n I_n / (U_n + 1e-8) with
// I = sum(p*y), U = sum(p) + sum(y) - I. Defined as 0 for an image whose
// prediction and mask are both identically zero.
tl::Tensor iou_loss(const tl::Tensor& pred, const tl::Tensor& gt);

// iou + lambda * sc
tl::Tensor total_loss(const tl::Tensor& iou, const tl::Tensor& sc, double lambda);

struct LossReport {
  double iou = 0.0;
  double sc = 0.0;
  double total = 0.0;
  double lambda = kDefaultLambda;
};

}  // namespace dcfm::losses
