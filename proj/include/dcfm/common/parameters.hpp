#pragma once

#include <string>
#include <vector>

#include "dcfm/common/rng.hpp"
#include "dcfm/tensorlab/tensor.hpp"

namespace dcfm {

// Learning-rate group: the feature extractor trains slower than the rest.
enum class ParamGroup { Extractor, Head };

struct Parameter {
  std::string name;
  tl::Tensor value;
  ParamGroup group = ParamGroup::Head;
  // Stored and checkpointed but never updated: the value only feeds a
  // non-differentiable choice, so it would otherwise see weight decay alone.
  bool trainable = true;
};

using ParameterList = std::vector<Parameter>;

// Trainable leaf drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
tl::Tensor init_uniform(tl::Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace dcfm
