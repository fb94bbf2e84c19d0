#include "dcfm/tensorlab/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace dcfm::tl {

namespace {

double scalar_value(const Tensor& y) {
  if (y.numel() != 1) throw ShapeError("grad_check: function must be scalar-valued, got shape " + to_string(y.shape()));
  return y.item();
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor leaf = x.clone(true);
  return grad_check_leaves([&] { return f(leaf); }, {leaf}, h).max_rel_error;
}

GradCheckReport grad_check_leaves(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double h) {
  for (auto& t : leaves) t.zero_grad();
  const Tensor y = f();
  scalar_value(y);
  y.backward();

  GradCheckReport report;
  for (std::size_t t = 0; t < leaves.size(); ++t) {
    Tensor& leaf = leaves[t];
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    auto values = leaf.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = scalar_value(f());
      values[i] = saved - h;
      const double down = scalar_value(f());
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      if (err > report.max_rel_error || (t == 0 && i == 0)) {
        report = {err, t, i, analytic[i], numeric};
      }
    }
  }
  return report;
}

}  // namespace dcfm::tl
