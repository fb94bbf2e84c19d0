#include "dcfm/scl.hpp"

#include <cmath>

#include "dcfm/tensorlab/ops.hpp"

namespace dcfm::scl {

tl::Tensor downscale_mask(const tl::Tensor& masks, std::size_t h, std::size_t w) {
  if (masks.rank() != 4 || masks.dim(1) != 1) {
    throw ShapeError("downscale_mask: expected [N,1,H,W], got " + tl::to_string(masks.shape()));
  }
  const std::size_t n = masks.dim(0), mh = masks.dim(2), mw = masks.dim(3);
  if (h == 0 || w == 0 || mh % h != 0 || mw % w != 0) {
    throw ShapeError("downscale_mask: " + tl::to_string(masks.shape()) + " does not tile into " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t fy = mh / h, fx = mw / w;
  const double inv_area = 1.0 / static_cast<double>(fy * fx);
  std::vector<double> out(n * h * w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < fy; ++dy)
          for (std::size_t dx = 0; dx < fx; ++dx) acc += masks[(i * mh + y * fy + dy) * mw + x * fx + dx];
        out[(i * h + y) * w + x] = acc * inv_area;
      }
  return tl::Tensor::from({n, h, w}, std::move(out));
}

MaskedPrototypePair erase_and_prototype(const tl::Tensor& f_ext, const tl::Tensor& masks,
                                        const dpg::DpgParams& params, tl::DecisionTape* tape) {
  if (masks.rank() != 4 || masks.dim(0) != f_ext.dim(0)) {
    throw ShapeError("erase_and_prototype: " + tl::to_string(masks.shape()) + " masks for " +
                     std::to_string(f_ext.dim(0)) + " images");
  }
  const tl::Tensor keep = downscale_mask(masks, f_ext.dim(2), f_ext.dim(3));
  std::vector<double> inverse(keep.numel());
  for (std::size_t i = 0; i < inverse.size(); ++i) inverse[i] = 1.0 - keep[i];
  const tl::Tensor erase = tl::Tensor::from(keep.shape(), std::move(inverse));

  MaskedPrototypePair pair;
  pair.proto_c = dpg::run_dpg(tl::mul_spatial(f_ext, keep), params, tape).proto.vector;
  pair.proto_b = dpg::run_dpg(tl::mul_spatial(f_ext, erase), params, tape).proto.vector;
  return pair;
}

tl::Tensor cosine_sim(const tl::Tensor& p1, const tl::Tensor& p2) {
  if (p1.shape() != p2.shape()) {
    throw ShapeError("cosine_sim: " + tl::to_string(p1.shape()) + " vs " + tl::to_string(p2.shape()));
  }
  double dot = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < p1.numel(); ++i) {
    dot += p1[i] * p2[i];
    s1 += p1[i] * p1[i];
    s2 += p2[i] * p2[i];
  }
  // sqrt(s*s) == s exactly, so cos(p, p) is exactly 1.
  const double root = std::sqrt(s1 * s2);
  const bool guarded = root < tl::kNormEpsilon;
  const double denom = guarded ? tl::kNormEpsilon : root;
  const double value = (1.0 + dot / denom) * 0.5;
  return tl::Tensor::make_result({1}, {value}, {p1, p2}, [=](tl::detail::Node& self) {
    const auto& a = self.inputs[0]->value;
    const auto& b = self.inputs[1]->value;
    const double g = self.grad[0] * 0.5;
    auto accumulate = [&](std::size_t which, const std::vector<double>& mine, const std::vector<double>& other,
                          double other_sq) {
      auto& in = *self.inputs[which];
      if (!in.requires_grad) return;
      auto& gin = in.grad_buffer();
      for (std::size_t i = 0; i < mine.size(); ++i) {
        const double d = guarded ? other[i] / denom
                                 : other[i] / denom - dot * other_sq * mine[i] / (denom * denom * denom);
        gin[i] += g * d;
      }
    };
    accumulate(0, a, b, s2);
    accumulate(1, b, a, s1);
  });
}

SclLossValue self_contrastive_loss(const tl::Tensor& proto, const MaskedPrototypePair& pair, double eps) {
  const tl::Tensor cos_c = cosine_sim(proto, pair.proto_c);
  const tl::Tensor cos_b = cosine_sim(proto, pair.proto_b);
  const tl::Tensor positive = tl::scale(tl::log(tl::add_scalar(cos_c, eps)), -1.0);
  const tl::Tensor negative = tl::scale(tl::log(tl::add_scalar(tl::scale(cos_b, -1.0), 1.0 + eps)), -1.0);
  SclLossValue out;
  out.loss = tl::add(positive, negative);
  out.cos_c = cos_c.item();
  out.cos_b = cos_b.item();
  out.positive_term = positive.item();
  out.negative_term = negative.item();
  return out;
}

}  // namespace dcfm::scl
