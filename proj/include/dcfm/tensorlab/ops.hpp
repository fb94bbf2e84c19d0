// Differentiable ops over Tensor. Shapes follow NCHW for feature maps and
// [rows, cols] for matrices. Only the broadcast patterns the pipeline uses
// are provided.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dcfm/tensorlab/tensor.hpp"

namespace dcfm::tl {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
// Gradient passes where lo <= a <= hi, zero outside.
Tensor clamp(const Tensor& a, double lo, double hi);

// Full reductions to a one-element tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);

// [R,K] x [K,S] -> [R,S]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x [N,Cin,H,W], w [Cout,Cin], bias [Cout] or undefined.
Tensor pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& bias);
// x [N,Cin,H,W], w [Cout,Cin,k,k], bias [Cout] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              std::size_t pad);
// Nearest-neighbour 2x upsampling of the spatial axes.
Tensor upsample2x(const Tensor& x);
// [N,Ca,H,W] ++ [N,Cb,H,W] -> [N,Ca+Cb,H,W]
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Row-wise softmax of a [R,S] matrix (max-subtracted).
Tensor softmax_rows(const Tensor& a);

inline constexpr double kNormEpsilon = 1e-12;

// Divides every axis-1 vector by max(||v||_2, 1e-12). Works for [R,C] and
// [N,C,H,W] (and any rank >= 2: axis 1 is the channel axis).
Tensor l2_normalize_channels(const Tensor& x);

struct RankMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> values;

  std::int32_t at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Per row: largest value gets rank 0; ties go to the lower column first.
// Not differentiable.
RankMatrix descending_rank(const Tensor& a);

// [N,C,H,W] -> [N*H*W, C], row index = (n*H + h)*W + w.
Tensor to_rows(const Tensor& x);
// Inverse of to_rows: [N*H*W, C] -> [N,C,H,W].
Tensor from_rows(const Tensor& rows, std::size_t n, std::size_t h, std::size_t w);

// [N,C,H,W] -> [1,C,H,W] for image n.
Tensor select_image(const Tensor& x, std::size_t n);
// N tensors [1,C,H,W] -> [N,C,H,W].
Tensor stack_images(const std::vector<Tensor>& parts);

// Picks rows of a [R,C] matrix; indices are constants.
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows);

// x [N,C,H,W] times m [N,H,W] broadcast over channels.
Tensor mul_spatial(const Tensor& x, const Tensor& m);
// x [N,C,H,W] times v [1,C] broadcast over images and positions.
Tensor mul_channel(const Tensor& x, const Tensor& v);
// [N,M,H,W] -> [N,H,W], mean over axis 1 in index order.
Tensor mean_axis1(const Tensor& x);
// [N,C,H,W] -> [1,C], mean over images and positions.
Tensor channel_mean(const Tensor& x);

// Per leading index: (x - mean) / sqrt(var + eps) over all other axes.
Tensor standardize_images(const Tensor& x, double eps = 1e-5);

}  // namespace dcfm::tl
