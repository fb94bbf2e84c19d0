// Central-difference verification of reverse-mode gradients.

#pragma once

#include <functional>
#include <vector>

#include "dcfm/tensorlab/tensor.hpp"

namespace dcfm::tl {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// max over coordinates of |analytic - numeric| / max(1, |numeric|), where
// numeric = (f(x + h e_i) - f(x - h e_i)) / 2h. `f` must return a
// one-element tensor; anything else is rejected with ShapeError.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

// Same check over several leaf tensors that `f` reads by capture. The
// leaves are perturbed in place and restored; their grads are overwritten.
GradCheckReport grad_check_leaves(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                                  double h = 1e-5);

}  // namespace dcfm::tl
