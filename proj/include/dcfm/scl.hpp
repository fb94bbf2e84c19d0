// Self-contrastive learning: prototypes of the background-erased and the
// object-erased features are contrasted with the plain prototype. Training
// only; inference never calls into this module.

#pragma once

#include "dcfm/dpg.hpp"

namespace dcfm::scl {

inline constexpr double kLogEpsilon = 1e-5;

// Area-average of binary masks [N,1,H,W] down to [N,h,w]. H and W must be
// multiples of h and w. Complementary masks give complementary results
// exactly when the cell area is a power of two.
tl::Tensor downscale_mask(const tl::Tensor& masks, std::size_t h, std::size_t w);

struct MaskedPrototypePair {
  tl::Tensor proto_c;  // from f_ext with the background erased
  tl::Tensor proto_b;  // from f_ext with the co-salient objects erased
};

// Runs the full prototype generation (seed selection included) twice with
// the shared parameters. `tape`, when given, records/replays seed choices
// of both passes in order (co-salient first).
MaskedPrototypePair erase_and_prototype(const tl::Tensor& f_ext, const tl::Tensor& masks,
                                        const dpg::DpgParams& params, tl::DecisionTape* tape = nullptr);

// (1 + p1.p2 / max(|p1||p2|, 1e-12)) / 2, a one-element tensor in [0,1].
tl::Tensor cosine_sim(const tl::Tensor& p1, const tl::Tensor& p2);

struct SclLossValue {
  tl::Tensor loss;
  double cos_c = 0.0;
  double cos_b = 0.0;
  double positive_term = 0.0;  // -log(cos_c + eps)
  double negative_term = 0.0;  // -log(1 - cos_b + eps)
};

SclLossValue self_contrastive_loss(const tl::Tensor& proto, const MaskedPrototypePair& pair,
                                   double eps = kLogEpsilon);

}  // namespace dcfm::scl
