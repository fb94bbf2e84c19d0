#include <cstdlib>
#include <string>
#include <vector>

#include <omp.h>

#include "kernels_common.hpp"

namespace dcfm::tl::kernels {

namespace {

int initial_thread_count() {
  int n = omp_get_max_threads();
  if (const char* env = std::getenv("DCFM_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap > 0 && cap < n) n = cap;
    } catch (...) {
    }
  }
  return n;
}

int& threads_setting() {
  static int n = initial_thread_count();
  return n;
}

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kMinParallelWork = 1u << 15;

}  // namespace

int thread_count() { return threads_setting(); }
void set_thread_count(int n) { threads_setting() = n > 0 ? n : 1; }

namespace parallel {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (m * n * k >= kMinParallelWork)
  for (long i = 0; i < rows; ++i)
    detail::gemm_nn_row(static_cast<std::size_t>(i), n, k, a.data(), b.data(), c.data(), accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  std::vector<double> bt(k * n);
  detail::transpose(n, k, b.data(), bt.data());
  gemm_nn(m, n, k, a, bt, c, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (m * n * k >= kMinParallelWork)
  for (long i = 0; i < rows; ++i)
    detail::gemm_tn_row(static_cast<std::size_t>(i), m, n, k, a.data(), b.data(), c.data(), accumulate);
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out) {
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel num_threads(thread_count()) if (g.batch > 1)
  {
    detail::ConvScratch s;
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n)
      detail::conv_forward_image(g, static_cast<std::size_t>(n), x.data(), w.data(), bias, out.data(), s);
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx) {
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel num_threads(thread_count()) if (g.batch > 1)
  {
    detail::ConvScratch s;
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n)
      detail::conv_backward_input_image(g, static_cast<std::size_t>(n), dy.data(), w.data(), dx.data(), s);
  }
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw,
                            std::span<double> db) {
  const std::size_t wsize = g.out_channels * g.patch();
  std::vector<double> dw_parts(g.batch * wsize);
  std::vector<double> db_parts(g.batch * g.out_channels);
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel num_threads(thread_count()) if (g.batch > 1)
  {
    detail::ConvScratch s;
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n) {
      const auto i = static_cast<std::size_t>(n);
      detail::conv_param_partial_image(g, i, x.data(), dy.data(), dw_parts.data() + i * wsize,
                                       db.empty() ? nullptr : db_parts.data() + i * g.out_channels, s);
    }
  }
  // Ordered reduction over images, identical to the serial kernel.
  for (std::size_t n = 0; n < g.batch; ++n) {
    const double* part = dw_parts.data() + n * wsize;
    for (std::size_t i = 0; i < wsize; ++i) dw[i] += part[i];
    if (!db.empty()) {
      const double* bpart = db_parts.data() + n * g.out_channels;
      for (std::size_t o = 0; o < g.out_channels; ++o) db[o] += bpart[o];
    }
  }
}

}  // namespace parallel
}  // namespace dcfm::tl::kernels
