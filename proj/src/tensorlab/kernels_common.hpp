// Per-row / per-image building blocks shared by the serial and parallel
// kernels. Keeping one definition of each inner loop is what makes the two
// drivers bit-identical.

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "dcfm/tensorlab/kernels.hpp"

namespace dcfm::tl::kernels::detail {

inline void gemm_nn_row(std::size_t i, std::size_t n, std::size_t k, const double* a,
                        const double* b, double* c, bool accumulate) {
  double* crow = c + i * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  const double* arow = a + i * k;
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double av = arow[kk];
    const double* brow = b + kk * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void gemm_tn_row(std::size_t i, std::size_t m, std::size_t n, std::size_t k,
                        const double* a, const double* b, double* c, bool accumulate) {
  double* crow = c + i * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double av = a[kk * m + i];
    const double* brow = b + kk * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

// x_img: [Cin, H, W] -> col: [Cin*k*k, Ho*Wo]
inline void im2col(const ConvGeometry& g, const double* x_img, double* col) {
  const std::size_t ho = g.out_h(), wo = g.out_w();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const double* plane = x_img + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        double* out = col + row * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.in_h) &&
                                ix < static_cast<long>(g.in_w);
            out[oy * wo + ox] = inside ? plane[iy * static_cast<long>(g.in_w) + ix] : 0.0;
          }
        }
      }
    }
  }
}

// dx_img += col2im(dcol)
inline void col2im_add(const ConvGeometry& g, const double* dcol, double* dx_img) {
  const std::size_t ho = g.out_h(), wo = g.out_w();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    double* plane = dx_img + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        const double* src = dcol + row * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
            plane[iy * static_cast<long>(g.in_w) + ix] += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

// Scratch for one image: the im2col matrix (unused for pointwise convs).
struct ConvScratch {
  std::vector<double> col;
  std::vector<double> tmp;
};

inline const double* image_columns(const ConvGeometry& g, const double* x_img, ConvScratch& s) {
  if (g.is_pointwise()) return x_img;
  s.col.resize(g.patch() * g.out_h() * g.out_w());
  im2col(g, x_img, s.col.data());
  return s.col.data();
}

inline void conv_forward_image(const ConvGeometry& g, std::size_t n, const double* x,
                               const double* w, std::span<const double> bias, double* out,
                               ConvScratch& s) {
  const std::size_t hw_out = g.out_h() * g.out_w();
  const double* col = image_columns(g, x + n * g.in_channels * g.in_h * g.in_w, s);
  double* out_img = out + n * g.out_channels * hw_out;
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    std::fill(out_img + o * hw_out, out_img + (o + 1) * hw_out, bias.empty() ? 0.0 : bias[o]);
    gemm_nn_row(o, hw_out, g.patch(), w, col, out_img, true);
  }
}

inline void conv_backward_input_image(const ConvGeometry& g, std::size_t n, const double* dy,
                                      const double* w, double* dx, ConvScratch& s) {
  const std::size_t hw_out = g.out_h() * g.out_w();
  const double* dy_img = dy + n * g.out_channels * hw_out;
  double* dx_img = dx + n * g.in_channels * g.in_h * g.in_w;
  if (g.is_pointwise()) {
    for (std::size_t i = 0; i < g.patch(); ++i)
      gemm_tn_row(i, g.patch(), hw_out, g.out_channels, w, dy_img, dx_img, true);
    return;
  }
  s.tmp.resize(g.patch() * hw_out);
  for (std::size_t i = 0; i < g.patch(); ++i)
    gemm_tn_row(i, g.patch(), hw_out, g.out_channels, w, dy_img, s.tmp.data(), false);
  col2im_add(g, s.tmp.data(), dx_img);
}

// Fresh per-image parameter gradient: dw_part [Cout, patch], db_part [Cout].
inline void conv_param_partial_image(const ConvGeometry& g, std::size_t n, const double* x,
                                     const double* dy, double* dw_part, double* db_part,
                                     ConvScratch& s) {
  const std::size_t hw_out = g.out_h() * g.out_w();
  const double* col = image_columns(g, x + n * g.in_channels * g.in_h * g.in_w, s);
  const double* dy_img = dy + n * g.out_channels * hw_out;
  // dw = dy_img [Cout, hw] * col^T ; col is [patch, hw]
  s.tmp.resize(hw_out * g.patch());
  transpose(g.patch(), hw_out, col, s.tmp.data());
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    gemm_nn_row(o, g.patch(), hw_out, dy_img, s.tmp.data(), dw_part, false);
    if (db_part) {
      double acc = 0.0;
      for (std::size_t p = 0; p < hw_out; ++p) acc += dy_img[o * hw_out + p];
      db_part[o] = acc;
    }
  }
}

}  // namespace dcfm::tl::kernels::detail
