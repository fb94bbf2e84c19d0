#include <vector>

#include "kernels_common.hpp"

namespace dcfm::tl::kernels::serial {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) detail::gemm_nn_row(i, n, k, a.data(), b.data(), c.data(), accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  std::vector<double> bt(k * n);
  detail::transpose(n, k, b.data(), bt.data());
  gemm_nn(m, n, k, a, bt, c, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    detail::gemm_tn_row(i, m, n, k, a.data(), b.data(), c.data(), accumulate);
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out) {
  detail::ConvScratch s;
  for (std::size_t n = 0; n < g.batch; ++n)
    detail::conv_forward_image(g, n, x.data(), w.data(), bias, out.data(), s);
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx) {
  detail::ConvScratch s;
  for (std::size_t n = 0; n < g.batch; ++n)
    detail::conv_backward_input_image(g, n, dy.data(), w.data(), dx.data(), s);
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw,
                            std::span<double> db) {
  detail::ConvScratch s;
  std::vector<double> dw_part(g.out_channels * g.patch());
  std::vector<double> db_part(g.out_channels);
  for (std::size_t n = 0; n < g.batch; ++n) {
    detail::conv_param_partial_image(g, n, x.data(), dy.data(), dw_part.data(),
                                     db.empty() ? nullptr : db_part.data(), s);
    for (std::size_t i = 0; i < dw_part.size(); ++i) dw[i] += dw_part[i];
    if (!db.empty())
      for (std::size_t o = 0; o < g.out_channels; ++o) db[o] += db_part[o];
  }
}

}  // namespace dcfm::tl::kernels::serial
