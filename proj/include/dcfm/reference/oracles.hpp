// Brute-force loop implementations used to cross-check the tensor code.
// Nothing here shares code with the library paths they verify: each
// function is a literal transcription with explicit index loops.

#pragma once

#include <cstddef>
#include <vector>

namespace dcfm::reference {

// Plain NCHW array.
struct Array4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  double at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) const { return v[((i * c + ch) * h + y) * w + x]; }
};

// out[c'] = sum_c w[c',c] x[c] + b[c'] at every pixel; empty b means no bias.
Array4 pointwise(const Array4& x, const std::vector<double>& w, const std::vector<double>& b, std::size_t out_channels);

struct SeedOracle {
  std::vector<double> probability;        // flat (n,h,w)
  std::vector<std::size_t> flat_indices;  // per image, into (n,h,w)
  std::vector<double> vectors;            // [N,C]
};

// Pixel p scores mean over images of max over that image's pixels q of
// <K_p, Q_q>; the first maximal pixel of each image is its seed.
SeedOracle seed_select(const Array4& f_res, const std::vector<double>& key_w, const std::vector<double>& key_b,
                       const std::vector<double>& query_w, const std::vector<double>& query_b);

struct ResponseOracle {
  std::vector<double> per_seed;  // [N,S,H,W]
  std::vector<double> final;     // [N,H,W]
  std::vector<double> proto;     // [C]
};

// Cosine of every pixel with every seed (zero vectors give 0), seed mean,
// then the response-weighted mean feature.
ResponseOracle response_and_prototype(const Array4& f_res, const std::vector<double>& seed_vectors);

// Full prototype generation from f_ext (residual weight [C,C], no bias).
std::vector<double> dpg_prototype(const Array4& f_ext, const std::vector<double>& residual_w,
                                  const std::vector<double>& key_w, const std::vector<double>& key_b,
                                  const std::vector<double>& query_w, const std::vector<double>& query_b);

// Weights for one attention row: (rank + 1)^alpha for positive entries,
// 1 otherwise, rank counted among all entries in descending order with
// ties to the lower column.
std::vector<double> readjust_weights(const std::vector<double>& row, double alpha);
std::vector<double> softmax(const std::vector<double>& row);

// Enhancement of one image [C,H,W] (as Array4 with n = 1).
Array4 enhance_image(const Array4& fused, const std::vector<double>& conv_w, const std::vector<double>& conv_b,
                     const std::vector<double>& key_w, const std::vector<double>& key_b,
                     const std::vector<double>& query_w, const std::vector<double>& query_b,
                     const std::vector<double>& value_w, const std::vector<double>& value_b, double alpha,
                     bool readjust = true);

double cosine_style(const std::vector<double>& a, const std::vector<double>& b);
double scl_loss(double cos_c, double cos_b);

// Per-image soft IoU loss, averaged.
double iou_loss(const std::vector<double>& pred, const std::vector<double>& gt, std::size_t images);

double mae(const std::vector<double>& pred, const std::vector<double>& gt);
// Walks every threshold separately, counting TP/FP/FN pixel by pixel.
double f_beta_max(const std::vector<double>& pred, const std::vector<double>& gt, double beta_sq = 0.3);

}  // namespace dcfm::reference
