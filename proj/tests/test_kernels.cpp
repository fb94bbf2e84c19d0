// The OpenMP kernels must reproduce the serial reference bit for bit.

#include <vector>

#include "doctest.h"

#include "dcfm/tensorlab/kernels.hpp"
#include "test_support.hpp"

using namespace dcfm::tl::kernels;
using dcfm::testing::random_values;

namespace {

struct ThreadGuard {
  int saved = thread_count();
  explicit ThreadGuard(int n) { set_thread_count(n); }
  ~ThreadGuard() { set_thread_count(saved); }
};

}  // namespace

TEST_CASE("gemm variants: parallel equals serial bitwise") {
  ThreadGuard threads(4);
  const std::size_t m = 37, n = 53, k = 41;
  const auto a = random_values(m * k, 1);
  const auto b = random_values(k * n, 2);
  const auto bt = random_values(n * k, 3);
  const auto at = random_values(k * m, 4);
  for (bool acc : {false, true}) {
    std::vector<double> c1 = random_values(m * n, 5), c2 = c1;
    serial::gemm_nn(m, n, k, a, b, c1, acc);
    parallel::gemm_nn(m, n, k, a, b, c2, acc);
    CHECK(c1 == c2);
    serial::gemm_nt(m, n, k, a, bt, c1, acc);
    parallel::gemm_nt(m, n, k, a, bt, c2, acc);
    CHECK(c1 == c2);
    serial::gemm_tn(m, n, k, at, b, c1, acc);
    parallel::gemm_tn(m, n, k, at, b, c2, acc);
    CHECK(c1 == c2);
  }
}

TEST_CASE("conv kernels: parallel equals serial bitwise") {
  ThreadGuard threads(3);
  for (const ConvGeometry g : {ConvGeometry{5, 3, 16, 16, 8, 3, 2, 1}, ConvGeometry{4, 6, 8, 8, 5, 3, 1, 1},
                               ConvGeometry{3, 7, 4, 4, 7, 1, 1, 0}}) {
    const auto x = random_values(g.batch * g.in_channels * g.in_h * g.in_w, 10);
    const auto w = random_values(g.out_channels * g.patch(), 11);
    const auto bias = random_values(g.out_channels, 12);
    const auto dy = random_values(g.batch * g.out_channels * g.out_h() * g.out_w(), 13);

    std::vector<double> y1(dy.size()), y2(dy.size());
    serial::conv2d_forward(g, x, w, bias, y1);
    parallel::conv2d_forward(g, x, w, bias, y2);
    CHECK(y1 == y2);

    std::vector<double> dx1(x.size(), 0.5), dx2(x.size(), 0.5);
    serial::conv2d_backward_input(g, dy, w, dx1);
    parallel::conv2d_backward_input(g, dy, w, dx2);
    CHECK(dx1 == dx2);

    std::vector<double> dw1(w.size(), 0.25), dw2(w.size(), 0.25), db1(bias.size()), db2(bias.size());
    serial::conv2d_backward_params(g, x, dy, dw1, db1);
    parallel::conv2d_backward_params(g, x, dy, dw2, db2);
    CHECK(dw1 == dw2);
    CHECK(db1 == db2);
  }
}

TEST_CASE("thread count setting is clamped to at least one") {
  ThreadGuard threads(1);
  set_thread_count(0);
  CHECK(thread_count() == 1);
}
