#include "dcfm/tensorlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dcfm/tensorlab/kernels.hpp"

namespace dcfm::tl {

namespace {

using detail::Node;
namespace kp = kernels::parallel;

// Gradient buffer of input i, or nullptr when it does not need one.
double* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? in.grad_buffer().data() : nullptr;
}

const std::vector<double>& input_value(Node& self, std::size_t i) { return self.inputs[i]->value; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t r, const char* op) {
  if (a.rank() != r) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + ", got shape " +
                     to_string(a.shape()));
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  return Tensor::make_result(a.shape(), std::move(out), {a}, [deriv](Node& self) {
    double* ga = input_grad(self, 0);
    const auto& x = input_value(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * deriv(x[i], self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (double* g = input_grad(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (double* g = input_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = input_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& x = input_value(self, 0);
    const auto& y = input_value(self, 1);
    if (double* g = input_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * y[i];
    if (double* g = input_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * x[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
               [lo, hi](double x, double) { return x >= lo && x <= hi ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return Tensor::make_result({1}, {acc}, {a}, [](Node& self) {
    double* g = input_grad(self, 0);
    const std::size_t n = self.inputs[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    double* g = input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner extents differ, " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  kp::gemm_nn(m, n, k, a.data(), b.data(), out, false);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    if (double* ga = input_grad(self, 0))  // dA = dC * B^T
      kp::gemm_nt(m, k, n, self.grad, input_value(self, 1), {ga, m * k}, true);
    if (double* gb = input_grad(self, 1))  // dB = A^T * dC
      kp::gemm_tn(k, n, m, input_value(self, 0), self.grad, {gb, k * n}, true);
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return Tensor::make_result({c, r}, std::move(out), {a}, [r, c](Node& self) {
    double* g = input_grad(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

namespace {

Tensor conv_impl(const Tensor& x, const Tensor& w, const Tensor& bias, kernels::ConvGeometry g,
                 const char* op) {
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.out_channels)) {
    throw ShapeError(std::string(op) + ": bias shape " + to_string(bias.shape()) +
                     " does not match " + std::to_string(g.out_channels) + " output channels");
  }
  std::vector<double> out(g.batch * g.out_channels * g.out_h() * g.out_w());
  const std::span<const double> b = bias.defined() ? bias.data() : std::span<const double>{};
  kp::conv2d_forward(g, x.data(), w.data(), b, out);
  std::vector<Tensor> inputs{x, w};
  const bool has_bias = bias.defined();
  if (has_bias) inputs.push_back(bias);
  return Tensor::make_result({g.batch, g.out_channels, g.out_h(), g.out_w()}, std::move(out),
                             std::move(inputs), [g, has_bias](Node& self) {
                               if (double* gx = input_grad(self, 0))
                                 kp::conv2d_backward_input(g, self.grad, input_value(self, 1),
                                                           {gx, self.inputs[0]->value.size()});
                               double* gw = input_grad(self, 1);
                               double* gb = has_bias ? input_grad(self, 2) : nullptr;
                               if (gw || gb) {
                                 std::vector<double> dw_scratch;
                                 std::span<double> dw;
                                 if (gw) {
                                   dw = {gw, self.inputs[1]->value.size()};
                                 } else {
                                   dw_scratch.assign(self.inputs[1]->value.size(), 0.0);
                                   dw = dw_scratch;
                                 }
                                 std::span<double> db;
                                 if (gb) db = {gb, g.out_channels};
                                 kp::conv2d_backward_params(g, input_value(self, 0), self.grad, dw, db);
                               }
                             });
}

}  // namespace

Tensor pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 4, "pointwise_conv");
  require_rank(w, 2, "pointwise_conv");
  if (w.dim(1) != x.dim(1)) {
    throw ShapeError("pointwise_conv: weight expects " + std::to_string(w.dim(1)) +
                     " input channels, input " + to_string(x.shape()) + " has " +
                     std::to_string(x.dim(1)));
  }
  kernels::ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), 1, 1, 0};
  return conv_impl(x, w, bias, g, "pointwise_conv");
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d");
  if (w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3)) {
    throw ShapeError("conv2d: weight " + to_string(w.shape()) + " incompatible with input " +
                     to_string(x.shape()));
  }
  if (x.dim(2) + 2 * pad < w.dim(2) || x.dim(3) + 2 * pad < w.dim(2) || stride == 0) {
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " too small for kernel");
  }
  kernels::ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), stride, pad};
  return conv_impl(x, w, bias, g, "conv2d");
}

Tensor upsample2x(const Tensor& x) {
  require_rank(x, 4, "upsample2x");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = 2 * h, wo = 2 * w;
  std::vector<double> out(planes * ho * wo);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx)
        out[(p * ho + y) * wo + xx] = x[(p * h + y / 2) * w + xx / 2];
  return Tensor::make_result({x.dim(0), x.dim(1), ho, wo}, std::move(out), {x},
                             [planes, h, w, ho, wo](Node& self) {
                               double* g = input_grad(self, 0);
                               for (std::size_t p = 0; p < planes; ++p)
                                 for (std::size_t y = 0; y < ho; ++y)
                                   for (std::size_t xx = 0; xx < wo; ++xx)
                                     g[(p * h + y / 2) * w + xx / 2] += self.grad[(p * ho + y) * wo + xx];
                             });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 4, "concat_channels");
  require_rank(b, 4, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  std::vector<double> out(n * (ca + cb) * hw);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data().begin() + i * ca * hw, ca * hw, out.begin() + i * (ca + cb) * hw);
    std::copy_n(b.data().begin() + i * cb * hw, cb * hw, out.begin() + (i * (ca + cb) + ca) * hw);
  }
  return Tensor::make_result({n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                             [n, ca, cb, hw](Node& self) {
                               const std::size_t stride = (ca + cb) * hw;
                               if (double* g = input_grad(self, 0))
                                 for (std::size_t i = 0; i < n; ++i)
                                   for (std::size_t j = 0; j < ca * hw; ++j) g[i * ca * hw + j] += self.grad[i * stride + j];
                               if (double* g = input_grad(self, 1))
                                 for (std::size_t i = 0; i < n; ++i)
                                   for (std::size_t j = 0; j < cb * hw; ++j)
                                     g[i * cb * hw + j] += self.grad[i * stride + ca * hw + j];
                             });
}

Tensor softmax_rows(const Tensor& a) {
  require_rank(a, 2, "softmax_rows");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = a.data().data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += out[i * c + j] = std::exp(row[j] - mx);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= total;
  }
  return Tensor::make_result({r, c}, std::move(out), {a}, [r, c](Node& self) {
    double* g = input_grad(self, 0);
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = self.value.data() + i * c;
      const double* gy = self.grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor l2_normalize_channels(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("l2_normalize_channels: rank below 2, shape " + to_string(x.shape()));
  const std::size_t outer = x.dim(0), c = x.dim(1), inner = x.numel() / (outer * c);
  std::vector<double> out(x.numel());
  std::vector<double> norms(outer * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t p = 0; p < inner; ++p) {
      double ss = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        const double v = x[(o * c + k) * inner + p];
        ss += v * v;
      }
      const double denom = std::max(std::sqrt(ss), kNormEpsilon);
      norms[o * inner + p] = denom;
      for (std::size_t k = 0; k < c; ++k) out[(o * c + k) * inner + p] = x[(o * c + k) * inner + p] / denom;
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [outer, c, inner, norms = std::move(norms)](Node& self) {
                               double* g = input_grad(self, 0);
                               for (std::size_t o = 0; o < outer; ++o) {
                                 for (std::size_t p = 0; p < inner; ++p) {
                                   const double denom = norms[o * inner + p];
                                   auto idx = [&](std::size_t k) { return (o * c + k) * inner + p; };
                                   if (denom <= kNormEpsilon) {
                                     // Guard active: y = x / eps, a linear map.
                                     for (std::size_t k = 0; k < c; ++k) g[idx(k)] += self.grad[idx(k)] / denom;
                                     continue;
                                   }
                                   double dot = 0.0;
                                   for (std::size_t k = 0; k < c; ++k) dot += self.grad[idx(k)] * self.value[idx(k)];
                                   for (std::size_t k = 0; k < c; ++k)
                                     g[idx(k)] += (self.grad[idx(k)] - self.value[idx(k)] * dot) / denom;
                                 }
                               }
                             });
}

RankMatrix descending_rank(const Tensor& a) {
  require_rank(a, 2, "descending_rank");
  RankMatrix z{a.dim(0), a.dim(1), std::vector<std::int32_t>(a.numel())};
  std::vector<std::size_t> order(z.cols);
  for (std::size_t i = 0; i < z.rows; ++i) {
    const double* row = a.data().data() + i * z.cols;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [row](std::size_t l, std::size_t r) { return row[l] > row[r]; });
    for (std::size_t pos = 0; pos < z.cols; ++pos)
      z.values[i * z.cols + order[pos]] = static_cast<std::int32_t>(pos);
  }
  return z;
}

Tensor to_rows(const Tensor& x) {
  require_rank(x, 4, "to_rows");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t p = 0; p < hw; ++p) out[(i * hw + p) * c + k] = x[(i * c + k) * hw + p];
  return Tensor::make_result({n * hw, c}, std::move(out), {x}, [n, c, hw](Node& self) {
    double* g = input_grad(self, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t p = 0; p < hw; ++p) g[(i * c + k) * hw + p] += self.grad[(i * hw + p) * c + k];
  });
}

Tensor from_rows(const Tensor& rows, std::size_t n, std::size_t h, std::size_t w) {
  require_rank(rows, 2, "from_rows");
  const std::size_t hw = h * w, c = rows.dim(1);
  if (rows.dim(0) != n * hw) {
    throw ShapeError("from_rows: " + to_string(rows.shape()) + " cannot hold " + std::to_string(n) +
                     " images of " + std::to_string(h) + "x" + std::to_string(w));
  }
  std::vector<double> out(rows.numel());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t p = 0; p < hw; ++p) out[(i * c + k) * hw + p] = rows[(i * hw + p) * c + k];
  return Tensor::make_result({n, c, h, w}, std::move(out), {rows}, [n, c, hw](Node& self) {
    double* g = input_grad(self, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t p = 0; p < hw; ++p) g[(i * hw + p) * c + k] += self.grad[(i * c + k) * hw + p];
  });
}

Tensor select_image(const Tensor& x, std::size_t n) {
  require_rank(x, 4, "select_image");
  if (n >= x.dim(0)) throw ShapeError("select_image: index " + std::to_string(n) + " out of " + to_string(x.shape()));
  const std::size_t per = x.numel() / x.dim(0);
  std::vector<double> out(x.data().begin() + n * per, x.data().begin() + (n + 1) * per);
  return Tensor::make_result({1, x.dim(1), x.dim(2), x.dim(3)}, std::move(out), {x}, [n, per](Node& self) {
    double* g = input_grad(self, 0) + n * per;
    for (std::size_t i = 0; i < per; ++i) g[i] += self.grad[i];
  });
}

Tensor stack_images(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack_images: no inputs");
  const Shape& first = parts.front().shape();
  if (first.size() != 4 || first[0] != 1) throw ShapeError("stack_images: parts must be [1,C,H,W], got " + to_string(first));
  for (const auto& p : parts) require_same_shape(p, parts.front(), "stack_images");
  const std::size_t per = parts.front().numel();
  std::vector<double> out;
  out.reserve(per * parts.size());
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor::make_result({parts.size(), first[1], first[2], first[3]}, std::move(out), parts,
                             [per](Node& self) {
                               for (std::size_t k = 0; k < self.inputs.size(); ++k)
                                 if (double* g = input_grad(self, k))
                                   for (std::size_t i = 0; i < per; ++i) g[i] += self.grad[k * per + i];
                             });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows) {
  require_rank(a, 2, "gather_rows");
  const std::size_t c = a.dim(1);
  std::vector<double> out(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.dim(0)) throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of " + to_string(a.shape()));
    std::copy_n(a.data().begin() + rows[i] * c, c, out.begin() + i * c);
  }
  return Tensor::make_result({rows.size(), c}, std::move(out), {a}, [rows, c](Node& self) {
    double* g = input_grad(self, 0);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < c; ++k) g[rows[i] * c + k] += self.grad[i * c + k];
  });
}

Tensor mul_spatial(const Tensor& x, const Tensor& m) {
  require_rank(x, 4, "mul_spatial");
  require_rank(m, 3, "mul_spatial");
  if (m.dim(0) != x.dim(0) || m.dim(1) != x.dim(2) || m.dim(2) != x.dim(3)) {
    throw ShapeError("mul_spatial: map " + to_string(m.shape()) + " does not match " + to_string(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t p = 0; p < hw; ++p) out[(i * c + k) * hw + p] = x[(i * c + k) * hw + p] * m[i * hw + p];
  return Tensor::make_result(x.shape(), std::move(out), {x, m}, [n, c, hw](Node& self) {
    const auto& xv = input_value(self, 0);
    const auto& mv = input_value(self, 1);
    double* gx = input_grad(self, 0);
    double* gm = input_grad(self, 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t p = 0; p < hw; ++p) {
          const std::size_t j = (i * c + k) * hw + p;
          if (gx) gx[j] += self.grad[j] * mv[i * hw + p];
          if (gm) gm[i * hw + p] += self.grad[j] * xv[j];
        }
  });
}

Tensor mul_channel(const Tensor& x, const Tensor& v) {
  require_rank(x, 4, "mul_channel");
  if (v.rank() != 2 || v.dim(0) != 1 || v.dim(1) != x.dim(1)) {
    throw ShapeError("mul_channel: vector " + to_string(v.shape()) + " does not match " + to_string(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t p = 0; p < hw; ++p) out[(i * c + k) * hw + p] = x[(i * c + k) * hw + p] * v[k];
  return Tensor::make_result(x.shape(), std::move(out), {x, v}, [n, c, hw](Node& self) {
    const auto& xv = input_value(self, 0);
    const auto& vv = input_value(self, 1);
    double* gx = input_grad(self, 0);
    double* gv = input_grad(self, 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t p = 0; p < hw; ++p) {
          const std::size_t j = (i * c + k) * hw + p;
          if (gx) gx[j] += self.grad[j] * vv[k];
          if (gv) gv[k] += self.grad[j] * xv[j];
        }
  });
}

Tensor mean_axis1(const Tensor& x) {
  require_rank(x, 4, "mean_axis1");
  const std::size_t n = x.dim(0), m = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> out(n * hw, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < hw; ++p) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += x[(i * m + k) * hw + p];
      out[i * hw + p] = acc / static_cast<double>(m);
    }
  return Tensor::make_result({n, x.dim(2), x.dim(3)}, std::move(out), {x}, [n, m, hw](Node& self) {
    double* g = input_grad(self, 0);
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t p = 0; p < hw; ++p) g[(i * m + k) * hw + p] += self.grad[i * hw + p] * inv;
  });
}

Tensor channel_mean(const Tensor& x) {
  require_rank(x, 4, "channel_mean");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const double inv = 1.0 / static_cast<double>(n * hw);
  std::vector<double> out(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < hw; ++p) acc += x[(i * c + k) * hw + p];
    out[k] = acc * inv;
  }
  return Tensor::make_result({1, c}, std::move(out), {x}, [n, c, hw, inv](Node& self) {
    double* g = input_grad(self, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t p = 0; p < hw; ++p) g[(i * c + k) * hw + p] += self.grad[k] * inv;
  });
}

Tensor standardize_images(const Tensor& x, double eps) {
  if (x.rank() < 2) throw ShapeError("standardize_images: expected [N,...], got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), m = x.numel() / n;
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> out(x.numel()), inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = x.data().data() + i * m;
    double mean = 0.0;
    for (std::size_t k = 0; k < m; ++k) mean += src[k];
    mean *= inv_m;
    double var = 0.0;
    for (std::size_t k = 0; k < m; ++k) var += (src[k] - mean) * (src[k] - mean);
    inv_std[i] = 1.0 / std::sqrt(var * inv_m + eps);
    for (std::size_t k = 0; k < m; ++k) out[i * m + k] = (src[k] - mean) * inv_std[i];
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [n, m, inv_m, inv_std](Node& self) {
    double* g = input_grad(self, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* dy = self.grad.data() + i * m;
      const double* y = self.value.data() + i * m;
      double mean_dy = 0.0, mean_dy_y = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        mean_dy += dy[k];
        mean_dy_y += dy[k] * y[k];
      }
      mean_dy *= inv_m;
      mean_dy_y *= inv_m;
      for (std::size_t k = 0; k < m; ++k) g[i * m + k] += inv_std[i] * (dy[k] - mean_dy - y[k] * mean_dy_y);
    }
  });
}

}  // namespace dcfm::tl
