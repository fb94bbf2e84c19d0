// Democratic feature enhancement: fusion of the group guidance into the
// residual features, then per-image self-attention whose small positive
// weights are amplified by (rank + 1)^alpha before aggregating values.

#pragma once

#include "dcfm/common/parameters.hpp"
#include "dcfm/dpg.hpp"
#include "dcfm/tensorlab/decision_tape.hpp"
#include "dcfm/tensorlab/ops.hpp"

namespace dcfm::dfe {

inline constexpr double kDefaultAlpha = 3.0;
inline constexpr double kMaxAlpha = 4.0;

struct DfeParams {
  tl::Tensor conv_w, conv_b;
  tl::Tensor key_w, key_b;
  tl::Tensor query_w, query_b;
  tl::Tensor value_w, value_b;

  static DfeParams init(std::size_t channels, Rng& rng);
  void append_parameters(ParameterList& out) const;
};

struct DfeOptions {
  double alpha = kDefaultAlpha;
  // false: plain softmax attention (readjustment weights fixed at 1).
  bool readjust = true;
};

// Throws ConfigError unless 0 < alpha <= 4.
void validate_alpha(double alpha);

// fused = f_res * final + f_res * proto (map broadcast over channels,
// prototype broadcast over images and positions).
tl::Tensor fuse(const tl::Tensor& f_res, const dpg::ResponseMaps& maps, const dpg::Prototype& proto);

struct AttentionBundle {
  tl::Tensor raw;          // A [HW,HW]
  tl::Tensor normalized;   // softmax over keys
  tl::RankMatrix rank;     // Z, descending per row
  tl::Tensor readjust;     // A^re, constant, >= 1
  tl::Tensor final;        // A^norm * A^re
};

// Readjustment from a raw attention matrix: A^re[i,j] = (Z[i,j]+1)^alpha
// where A[i,j] > 0, else 1. Rank and sign are recorded on `tape`.
AttentionBundle readjust_attention(const tl::Tensor& raw, const DfeOptions& options,
                                   tl::DecisionTape* tape = nullptr);

struct ImageAttention {
  tl::Tensor conv_features;  // F_conv [1,C,H,W]
  tl::Tensor value_rows;     // F_v [HW,C]
  AttentionBundle attention;
};

// One image [1,C,H,W] (or [C,H,W]) through conv+ReLU, key/query/value.
ImageAttention democratic_attention(const tl::Tensor& fused_image, const DfeParams& params,
                                    const DfeOptions& options, tl::DecisionTape* tape = nullptr);

// F_conv + reshape(A_final * F_v) for one image.
tl::Tensor apply_attention(const tl::Tensor& conv_features, const tl::Tensor& value_rows,
                           const tl::Tensor& attention_final);

// Every image of fused [N,C,H,W] enhanced independently.
tl::Tensor enhance(const tl::Tensor& fused, const DfeParams& params, const DfeOptions& options,
                   tl::DecisionTape* tape = nullptr);

}  // namespace dcfm::dfe
