#include <cmath>

#include "doctest.h"

#include "dcfm/metrics.hpp"
#include "dcfm/reference/oracles.hpp"
#include "test_support.hpp"

using namespace dcfm;
using dcfm::testing::random_values;

namespace {

std::vector<double> random_gt(std::size_t n, std::uint64_t seed) {
  auto v = random_values(n, seed, 0.0, 1.0);
  for (auto& x : v) x = x < 0.35 ? 1.0 : 0.0;
  v[n / 2] = 1.0;
  return v;
}

}  // namespace

TEST_CASE("quantize_8bit rounds half up after clamping") {
  CHECK(metrics::quantize_8bit(0.0) == 0);
  CHECK(metrics::quantize_8bit(1.0) == 255);
  CHECK(metrics::quantize_8bit(-0.3) == 0);
  CHECK(metrics::quantize_8bit(1.7) == 255);
  CHECK(metrics::quantize_8bit(0.5) == 128);  // 127.5 rounds up
  CHECK(metrics::quantize_8bit(0.1) == 26);   // 25.5 rounds up
}

TEST_CASE("mae") {
  const std::vector<double> gt{1, 0, 0, 1};
  CHECK(metrics::mae(gt, gt) == 0.0);
  CHECK(metrics::mae(std::vector<double>{0, 1, 1, 0}, gt) == 1.0);
  CHECK_THROWS_AS(metrics::mae(std::vector<double>{0, 1}, gt), ShapeError);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = random_values(50, s, 0.0, 1.0);
    const auto g = random_gt(50, 100 + s);
    CHECK(std::abs(metrics::mae(p, g) - reference::mae(p, g)) < 1e-15);
    std::vector<double> ip(p), ig(g);
    for (auto& v : ip) v = 1.0 - v;
    for (auto& v : ig) v = 1.0 - v;
    CHECK(metrics::mae(ip, ig) == doctest::Approx(metrics::mae(p, g)).epsilon(1e-14));
  }
}

TEST_CASE("f_beta_max") {
  SUBCASE("exact binary prediction scores one") {
    const std::vector<double> gt{1, 0, 1, 1, 0};
    const auto f = metrics::f_beta_max(gt, gt);
    CHECK(f.f_beta_max == 1.0);
    CHECK(f.precision.size() == 256);
  }
  SUBCASE("all-zero prediction scores zero") {
    CHECK(metrics::f_beta_max(std::vector<double>(4, 0.0), std::vector<double>{1, 0, 0, 1}).f_beta_max == 0.0);
  }
  SUBCASE("four-pixel example") {
    // Levels 230, 102, 153, 26. Thresholds 153..229 keep only the first
    // pixel: P = 1, R = 1/2, F = 1.3 * 0.5 / 0.8.
    const std::vector<double> gt{1, 1, 0, 0}, pred{0.9, 0.4, 0.6, 0.1};
    const auto f = metrics::f_beta_max(pred, gt);
    CHECK(f.f_beta_max == doctest::Approx(0.8125).epsilon(1e-15));
    CHECK(f.best_threshold == 153);
    CHECK(f.f_beta_max == reference::f_beta_max(pred, gt));
    CHECK(f.f_beta[26] == doctest::Approx(1.3 * (2.0 / 3.0) / (0.3 * (2.0 / 3.0) + 1.0)).epsilon(1e-15));
  }
  SUBCASE("empty ground truth is undefined") {
    CHECK_THROWS_AS(metrics::f_beta_max(std::vector<double>{0.3, 0.8}, std::vector<double>{0, 0}),
                    metrics::UndefinedMetricError);
  }
  SUBCASE("random maps match the per-threshold oracle") {
    for (std::uint64_t s = 0; s < 30; ++s) {
      const auto p = random_values(64, 200 + s, 0.0, 1.0);
      const auto g = random_gt(64, 300 + s);
      CHECK(std::abs(metrics::f_beta_max(p, g).f_beta_max - reference::f_beta_max(p, g)) < 1e-12);
    }
  }
  SUBCASE("monotone rescaling of quantisation levels keeps the maximum") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      auto levels = random_values(40, 400 + s, 0.0, 127.0);
      std::vector<double> a, b;
      for (double l : levels) {
        a.push_back(std::floor(l) / 255.0);
        b.push_back(2.0 * std::floor(l) / 255.0);
      }
      const auto g = random_gt(40, 500 + s);
      CHECK(metrics::f_beta_max(a, g).f_beta_max == metrics::f_beta_max(b, g).f_beta_max);
    }
  }
}

TEST_CASE("evaluate combines both metrics") {
  const std::vector<double> gt{1, 0, 0, 1};
  const auto r = metrics::evaluate(gt, gt);
  CHECK(r.mae == 0.0);
  CHECK(r.fmeasure.f_beta_max == 1.0);
}
