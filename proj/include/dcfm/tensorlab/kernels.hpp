// Raw numeric kernels behind the differentiable ops.
//
// Every kernel exists twice: `serial::` is the reference loop nest and
// `parallel::` is the OpenMP version. Both accumulate every output element
// in the same order, so their results are bit-identical for any thread
// count. Buffers are row-major; "accumulate" adds into the destination
// instead of overwriting it.

#pragma once

#include <cstddef>
#include <span>

namespace dcfm::tl::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  std::size_t patch() const { return in_channels * kernel * kernel; }
  bool is_pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

namespace serial {

// c[m,n] (+)= a[m,k] * b[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
// c[m,n] (+)= a[m,k] * b[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
// c[m,n] (+)= a[k,m]^T * b[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

// out = conv(x, w) + bias; bias may be empty.
void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out);
// dx += conv^T(dy, w)
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx);
// dw += sum_n dy[n] * col(x[n])^T ; db += sum_n,p dy[n,:,p]. Per-image
// partials are formed from zero and added in image order. db may be empty.
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw,
                            std::span<double> db);

}  // namespace serial

namespace parallel {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx);
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw,
                            std::span<double> db);

}  // namespace parallel

/// Worker count used by the parallel kernels (reads DCFM_THREADS once).
int thread_count();
void set_thread_count(int n);

}  // namespace dcfm::tl::kernels
