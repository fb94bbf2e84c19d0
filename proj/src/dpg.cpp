#include "dcfm/dpg.hpp"

#include <limits>

#include "dcfm/tensorlab/ops.hpp"

namespace dcfm::dpg {

DpgParams DpgParams::init(std::size_t channels, Rng& rng) {
  DpgParams p;
  p.residual_w = init_uniform({channels, channels}, channels, rng);
  p.key_w = init_uniform({channels, channels}, channels, rng);
  p.key_b = init_uniform({channels}, channels, rng);
  p.query_w = init_uniform({channels, channels}, channels, rng);
  p.query_b = init_uniform({channels}, channels, rng);
  return p;
}

void DpgParams::append_parameters(ParameterList& out) const {
  out.push_back({"dpg.residual.weight", residual_w});
  out.push_back({"dpg.key.weight", key_w, ParamGroup::Head, false});
  out.push_back({"dpg.key.bias", key_b, ParamGroup::Head, false});
  out.push_back({"dpg.query.weight", query_w, ParamGroup::Head, false});
  out.push_back({"dpg.query.bias", query_b, ParamGroup::Head, false});
}

tl::Tensor residual_features(const tl::Tensor& f_ext, const DpgParams& params) {
  return tl::add(f_ext, tl::pointwise_conv(f_ext, params.residual_w, tl::Tensor()));
}

std::vector<double> cosalient_probability(const tl::Tensor& f_res, const DpgParams& params) {
  const tl::Tensor x = f_res.detach();
  const std::size_t n = x.dim(0), hw = x.dim(2) * x.dim(3), total = n * hw;
  const tl::Tensor keys = tl::to_rows(tl::pointwise_conv(x, params.key_w.detach(), params.key_b.detach()));
  const tl::Tensor queries = tl::to_rows(tl::pointwise_conv(x, params.query_w.detach(), params.query_b.detach()));
  const tl::Tensor sim = tl::matmul(keys, tl::transpose(queries));  // [NHW, NHW]

  std::vector<double> prob(total);
  for (std::size_t p = 0; p < total; ++p) {
    const double* row = sim.data().data() + p * total;
    double acc = 0.0;
    for (std::size_t img = 0; img < n; ++img) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < hw; ++i) best = std::max(best, row[img * hw + i]);
      acc += best;
    }
    prob[p] = acc / static_cast<double>(n);
  }
  return prob;
}

SeedSet seed_select(const tl::Tensor& f_res, const DpgParams& params, tl::DecisionTape* tape) {
  if (f_res.rank() != 4 || f_res.dim(0) == 0) {
    throw ShapeError("seed_select: expected [N,C,H,W] with N >= 1, got " + tl::to_string(f_res.shape()));
  }
  const std::size_t n = f_res.dim(0), w = f_res.dim(3), hw = f_res.dim(2) * w;
  const auto flat = tl::decide(tape, [&] {
    const auto prob = cosalient_probability(f_res, params);
    std::vector<std::int64_t> picks(n);
    for (std::size_t img = 0; img < n; ++img) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < hw; ++i)
        if (prob[img * hw + i] > prob[img * hw + best]) best = i;
      picks[img] = static_cast<std::int64_t>(img * hw + best);
    }
    return picks;
  });

  SeedSet seeds;
  std::vector<std::size_t> rows(flat.begin(), flat.end());
  for (std::size_t r : rows) {
    const std::size_t pos = r % hw;
    seeds.indices.push_back({r / hw, pos / w, pos % w});
  }
  seeds.vectors = tl::gather_rows(tl::to_rows(f_res), rows);
  return seeds;
}

ResponseMaps democratic_response(const tl::Tensor& f_res, const SeedSet& seeds) {
  const std::size_t n = f_res.dim(0), h = f_res.dim(2), w = f_res.dim(3);
  if (seeds.vectors.rank() != 2 || seeds.vectors.dim(1) != f_res.dim(1)) {
    throw ShapeError("democratic_response: seeds " + tl::to_string(seeds.vectors.shape()) +
                     " do not match features " + tl::to_string(f_res.shape()));
  }
  const tl::Tensor pixels = tl::to_rows(tl::l2_normalize_channels(f_res));        // [NHW, C]
  const tl::Tensor kernels = tl::l2_normalize_channels(seeds.vectors);            // [S, C]
  // Unit-vector dot products can overshoot +-1 by an ulp.
  const tl::Tensor corr = tl::clamp(tl::matmul(pixels, tl::transpose(kernels)), -1.0, 1.0);  // [NHW, S]
  ResponseMaps maps;
  maps.per_seed = tl::from_rows(corr, n, h, w);  // [N, S, H, W]
  maps.final = tl::mean_axis1(maps.per_seed);
  return maps;
}

Prototype build_prototype(const tl::Tensor& f_res, const ResponseMaps& maps) {
  return {tl::channel_mean(tl::mul_spatial(f_res, maps.final))};
}

DpgOutput run_dpg(const tl::Tensor& f_ext, const DpgParams& params, tl::DecisionTape* tape) {
  DpgOutput out;
  out.residual = residual_features(f_ext, params);
  out.seeds = seed_select(out.residual, params, tape);
  out.maps = democratic_response(out.residual, out.seeds);
  out.proto = build_prototype(out.residual, out.maps);
  return out;
}

}  // namespace dcfm::dpg
