#include "dcfm/common/parameters.hpp"

#include <cmath>

namespace dcfm {

tl::Tensor init_uniform(tl::Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(tl::numel_of(shape));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return tl::Tensor::from(std::move(shape), std::move(values), true);
}

}  // namespace dcfm
