#include <cmath>

#include "doctest.h"

#include "dcfm/dpg.hpp"
#include "dcfm/reference/oracles.hpp"
#include "dcfm/tensorlab/grad_check.hpp"
#include "dcfm/tensorlab/ops.hpp"
#include "test_support.hpp"

using namespace dcfm;
using dcfm::testing::as_array;
using dcfm::testing::identity_values;
using dcfm::testing::random_tensor;
using dcfm::testing::random_values;
using dcfm::testing::values;
using tl::Tensor;

namespace {

dpg::DpgParams identity_params(std::size_t c) {
  dpg::DpgParams p;
  p.residual_w = Tensor::zeros({c, c});
  p.key_w = Tensor::from({c, c}, identity_values(c));
  p.key_b = Tensor::zeros({c});
  p.query_w = Tensor::from({c, c}, identity_values(c));
  p.query_b = Tensor::zeros({c});
  return p;
}

dpg::DpgParams random_params(std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  return dpg::DpgParams::init(c, rng);
}

// Two 1x2 images, C = 2: image 0 holds (1,0) and (0,1), image 1 holds
// (1,0) and (0,-1). Layout [N,C,H,W].
Tensor running_example() { return Tensor::from({2, 2, 1, 2}, {1, 0, 0, 1, 1, 0, 0, -1}); }

Tensor permute_images(const Tensor& x, const std::vector<std::size_t>& order) {
  std::vector<Tensor> parts;
  for (auto i : order) parts.push_back(tl::select_image(x, i));
  return tl::stack_images(parts);
}

}  // namespace

TEST_CASE("residual_features") {
  const Tensor f = random_tensor({2, 3, 2, 2}, 1);
  SUBCASE("zero residual branch leaves features unchanged") {
    CHECK(values(dpg::residual_features(f, identity_params(3))) == values(f));
  }
  SUBCASE("identity residual branch doubles features") {
    auto p = identity_params(3);
    p.residual_w = Tensor::from({3, 3}, identity_values(3));
    const auto r = values(dpg::residual_features(f, p));
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == 2.0 * f[i]);
  }
  SUBCASE("random weights match the composition oracle") {
    const auto p = random_params(3, 2);
    const auto conv = reference::pointwise(as_array(f), values(p.residual_w), {}, 3);
    const auto r = values(dpg::residual_features(f, p));
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == doctest::Approx(f[i] + conv.v[i]).epsilon(1e-14));
  }
}

TEST_CASE("seed_select") {
  SUBCASE("one pixel per image forces the choice") {
    const auto s = dpg::seed_select(random_tensor({3, 4, 1, 1}, 3), random_params(4, 4));
    REQUIRE(s.indices.size() == 3);
    for (std::size_t n = 0; n < 3; ++n) CHECK(s.indices[n] == dpg::SeedIndex{n, 0, 0});
  }
  SUBCASE("running example") {
    const Tensor f = running_example();
    const auto p = identity_params(2);
    CHECK(dpg::cosalient_probability(f, p) == std::vector<double>{1.0, 0.5, 1.0, 0.5});
    const auto s = dpg::seed_select(f, p);
    CHECK(s.indices[0] == dpg::SeedIndex{0, 0, 0});
    CHECK(s.indices[1] == dpg::SeedIndex{1, 0, 0});
    CHECK(values(s.vectors) == std::vector<double>{1, 0, 1, 0});
  }
  SUBCASE("identical images pick identical positions") {
    const Tensor img = random_tensor({1, 5, 3, 3}, 5);
    const auto s = dpg::seed_select(tl::stack_images({img, img}), random_params(5, 6));
    CHECK(s.indices[0].h == s.indices[1].h);
    CHECK(s.indices[0].w == s.indices[1].w);
  }
  SUBCASE("matches the brute-force oracle exactly") {
    for (std::uint64_t trial = 0; trial < 40; ++trial) {
      const std::size_t n = 1 + trial % 4, c = 1 + (trial * 3) % 8, h = 1 + trial % 4, w = 1 + (trial / 4) % 4;
      const Tensor f = random_tensor({n, c, h, w}, 100 + trial);
      const auto p = random_params(c, 200 + trial);
      const auto s = dpg::seed_select(f, p);
      const auto o = reference::seed_select(as_array(f), values(p.key_w), values(p.key_b), values(p.query_w),
                                            values(p.query_b));
      for (std::size_t i = 0; i < n; ++i) {
        const auto& idx = s.indices[i];
        CHECK((idx.image * h + idx.h) * w + idx.w == o.flat_indices[i]);
      }
      CHECK(values(s.vectors) == o.vectors);
    }
  }
  SUBCASE("ties resolve to the lowest index") {
    const auto s = dpg::seed_select(Tensor::zeros({2, 3, 2, 2}), random_params(3, 7));
    CHECK(s.indices[0] == dpg::SeedIndex{0, 0, 0});
    CHECK(s.indices[1] == dpg::SeedIndex{1, 0, 0});
  }
}

TEST_CASE("democratic_response") {
  SUBCASE("single image: the seed correlates with itself at 1") {
    const Tensor f = random_tensor({1, 6, 3, 3}, 8);
    const auto seeds = dpg::seed_select(f, random_params(6, 9));
    const auto maps = dpg::democratic_response(f, seeds);
    const auto& i = seeds.indices[0];
    CHECK(maps.final[i.h * 3 + i.w] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("running example") {
    const Tensor f = running_example();
    const auto maps = dpg::democratic_response(f, dpg::seed_select(f, identity_params(2)));
    CHECK(values(maps.final) == std::vector<double>{1, 0, 1, 0});
    CHECK(maps.per_seed.shape() == tl::Shape{2, 2, 1, 2});
  }
  SUBCASE("values stay within [-1, 1] and match the loop oracle") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      const Tensor f = random_tensor({3, 5, 2, 3}, 300 + trial);
      const auto seeds = dpg::seed_select(f, random_params(5, 400 + trial));
      const auto maps = dpg::democratic_response(f, seeds);
      const auto o = reference::response_and_prototype(as_array(f), values(seeds.vectors));
      const auto per = values(maps.per_seed);
      for (std::size_t k = 0; k < per.size(); ++k) {
        CHECK(std::abs(per[k]) <= 1.0);
        CHECK(std::abs(per[k] - o.per_seed[k]) < 1e-12);
      }
      const auto fin = values(maps.final);
      for (std::size_t k = 0; k < fin.size(); ++k) CHECK(std::abs(fin[k] - o.final[k]) < 1e-12);
    }
  }
  SUBCASE("zero pixels correlate at 0") {
    Tensor f = random_tensor({2, 3, 1, 2}, 10);
    for (std::size_t c = 0; c < 3; ++c) f.mutable_data()[c * 2 + 1] = 0.0;  // image 0, pixel 1
    const auto maps = dpg::democratic_response(f, dpg::seed_select(f, random_params(3, 11)));
    CHECK(maps.final[1] == 0.0);
  }
}

TEST_CASE("build_prototype") {
  const Tensor f = random_tensor({2, 3, 2, 2}, 12);
  SUBCASE("unit map gives the global mean feature") {
    const dpg::ResponseMaps maps{Tensor(), Tensor::full({2, 2, 2}, 1.0)};
    const auto proto = values(dpg::build_prototype(f, maps).vector);
    for (std::size_t c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t k = 0; k < 4; ++k) acc += f[(n * 3 + c) * 4 + k];
      CHECK(proto[c] == doctest::Approx(acc / 8.0).epsilon(1e-14));
    }
  }
  SUBCASE("zero map gives the zero vector") {
    const dpg::ResponseMaps maps{Tensor(), Tensor::zeros({2, 2, 2})};
    CHECK(values(dpg::build_prototype(f, maps).vector) == std::vector<double>(3, 0.0));
  }
  SUBCASE("running example") {
    const auto out = dpg::run_dpg(running_example(), identity_params(2));
    CHECK(values(out.proto.vector) == std::vector<double>{0.5, 0.0});
  }
  SUBCASE("matches the loop oracle") {
    const auto p = random_params(3, 13);
    const auto out = dpg::run_dpg(f, p);
    const auto o = reference::response_and_prototype(as_array(out.residual), values(out.seeds.vectors));
    const auto proto = values(out.proto.vector);
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(proto[c] - o.proto[c]) < 1e-12);
  }
}

TEST_CASE("image permutation permutes seeds and maps and keeps the prototype") {
  const Tensor f = random_tensor({3, 4, 2, 2}, 14);
  const auto p = random_params(4, 15);
  const std::vector<std::size_t> order{2, 0, 1};
  const auto a = dpg::run_dpg(f, p);
  const auto b = dpg::run_dpg(permute_images(f, order), p);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(b.seeds.indices[i].h == a.seeds.indices[order[i]].h);
    CHECK(b.seeds.indices[i].w == a.seeds.indices[order[i]].w);
    for (std::size_t m = 0; m < 3; ++m)
      for (std::size_t k = 0; k < 4; ++k) {
        const double va = a.maps.per_seed[(order[i] * 3 + order[m]) * 4 + k];
        const double vb = b.maps.per_seed[(i * 3 + m) * 4 + k];
        CHECK(vb == doctest::Approx(va).epsilon(1e-13));
      }
  }
  const auto pa = values(a.proto.vector), pb = values(b.proto.vector);
  for (std::size_t c = 0; c < 4; ++c) CHECK(pb[c] == doctest::Approx(pa[c]).epsilon(1e-12));
}

TEST_CASE("positive scaling keeps maps and scales the prototype") {
  const Tensor f = random_tensor({2, 4, 2, 2}, 16);
  const auto p = identity_params(4);
  const auto a = dpg::run_dpg(f, p);
  const auto b = dpg::run_dpg(tl::scale(f, 2.5), p);
  const auto fa = values(a.maps.final), fb = values(b.maps.final);
  for (std::size_t k = 0; k < fa.size(); ++k) CHECK(fb[k] == doctest::Approx(fa[k]).epsilon(1e-13));
  const auto pa = values(a.proto.vector), pb = values(b.proto.vector);
  for (std::size_t c = 0; c < 4; ++c) CHECK(pb[c] == doctest::Approx(2.5 * pa[c]).epsilon(1e-12));
}

TEST_CASE("prototype gradient with seeds held fixed") {
  const Tensor f = random_tensor({2, 3, 2, 2}, 17, true);
  const auto p = random_params(3, 18);
  const Tensor probe = random_tensor({1, 3}, 19);
  tl::DecisionTape tape;
  auto objective = [&](const Tensor& x) {
    const auto out = dpg::run_dpg(x, p, &tape);
    return tl::sum(tl::mul(out.proto.vector, probe));
  };
  objective(f);
  tape.replay();
  // Each evaluation consumes one tape entry; rewind per call.
  const double err = tl::grad_check(
      [&](const Tensor& x) {
        tape.replay();
        return objective(x);
      },
      f, 1e-5);
  CHECK(err < 1e-4);
}
