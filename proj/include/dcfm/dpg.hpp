// Democratic prototype generation.
//
// residual block -> seed selection -> democratic response -> prototype.
// Seed selection scores every pixel by its best match in each image of the
// group (averaged over the group) and keeps the top pixel per image. Each
// image's seed then votes on every pixel by cosine similarity; the averaged
// vote weights the features into a single group prototype.

#pragma once

#include <cstddef>
#include <vector>

#include "dcfm/common/parameters.hpp"
#include "dcfm/tensorlab/decision_tape.hpp"
#include "dcfm/tensorlab/tensor.hpp"

namespace dcfm::dpg {

struct DpgParams {
  tl::Tensor residual_w;  // [C,C], no bias
  tl::Tensor key_w, key_b;
  tl::Tensor query_w, query_b;

  static DpgParams init(std::size_t channels, Rng& rng);
  void append_parameters(ParameterList& out) const;
};

struct SeedIndex {
  std::size_t image = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  bool operator==(const SeedIndex&) const = default;
};

struct SeedSet {
  tl::Tensor vectors;  // [N,C], rows of the residual features
  std::vector<SeedIndex> indices;
};

struct ResponseMaps {
  tl::Tensor per_seed;  // [N(image), N(seed), H, W]
  tl::Tensor final;     // [N,H,W], mean over seeds
};

struct Prototype {
  tl::Tensor vector;  // [1,C]
};

// f_res = f_ext + conv1x1(f_ext)
tl::Tensor residual_features(const tl::Tensor& f_ext, const DpgParams& params);

// Co-salient probability P over all N*H*W pixels (flat (n,h,w) order), the
// quantity maximised per image to pick seeds. Plain values, no graph.
std::vector<double> cosalient_probability(const tl::Tensor& f_res, const DpgParams& params);

// Seed indices are a non-differentiable choice; gradients reach f_res only
// through the gathered vectors. Ties resolve to the lowest flat index.
SeedSet seed_select(const tl::Tensor& f_res, const DpgParams& params, tl::DecisionTape* tape = nullptr);

ResponseMaps democratic_response(const tl::Tensor& f_res, const SeedSet& seeds);

Prototype build_prototype(const tl::Tensor& f_res, const ResponseMaps& maps);

struct DpgOutput {
  tl::Tensor residual;
  SeedSet seeds;
  ResponseMaps maps;
  Prototype proto;
};

DpgOutput run_dpg(const tl::Tensor& f_ext, const DpgParams& params, tl::DecisionTape* tape = nullptr);

}  // namespace dcfm::dpg
