#include "dcfm/reference/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dcfm::reference {

Array4 pointwise(const Array4& x, const std::vector<double>& w, const std::vector<double>& b, std::size_t out_channels) {
  Array4 y{x.n, out_channels, x.h, x.w, std::vector<double>(x.n * out_channels * x.h * x.w)};
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t o = 0; o < out_channels; ++o)
      for (std::size_t r = 0; r < x.h; ++r)
        for (std::size_t q = 0; q < x.w; ++q) {
          double acc = b.empty() ? 0.0 : b[o];
          for (std::size_t c = 0; c < x.c; ++c) acc += w[o * x.c + c] * x.at(i, c, r, q);
          y.v[((i * out_channels + o) * x.h + r) * x.w + q] = acc;
        }
  return y;
}

SeedOracle seed_select(const Array4& f, const std::vector<double>& key_w, const std::vector<double>& key_b,
                       const std::vector<double>& query_w, const std::vector<double>& query_b) {
  const Array4 k = pointwise(f, key_w, key_b, f.c);
  const Array4 q = pointwise(f, query_w, query_b, f.c);
  SeedOracle out;
  for (std::size_t i = 0; i < f.n; ++i)
    for (std::size_t y = 0; y < f.h; ++y)
      for (std::size_t x = 0; x < f.w; ++x) {
        double total = 0.0;
        for (std::size_t j = 0; j < f.n; ++j) {
          double best = -std::numeric_limits<double>::infinity();
          for (std::size_t yy = 0; yy < f.h; ++yy)
            for (std::size_t xx = 0; xx < f.w; ++xx) {
              double s = 0.0;
              for (std::size_t c = 0; c < f.c; ++c) s += k.at(i, c, y, x) * q.at(j, c, yy, xx);
              if (s > best) best = s;
            }
          total += best;
        }
        out.probability.push_back(total / static_cast<double>(f.n));
      }
  const std::size_t hw = f.h * f.w;
  for (std::size_t i = 0; i < f.n; ++i) {
    std::size_t pick = 0;
    for (std::size_t p = 0; p < hw; ++p)
      if (out.probability[i * hw + p] > out.probability[i * hw + pick]) pick = p;
    out.flat_indices.push_back(i * hw + pick);
    for (std::size_t c = 0; c < f.c; ++c) out.vectors.push_back(f.at(i, c, pick / f.w, pick % f.w));
  }
  return out;
}

ResponseOracle response_and_prototype(const Array4& f, const std::vector<double>& seeds) {
  const std::size_t s = seeds.size() / f.c;
  ResponseOracle out;
  out.per_seed.assign(f.n * s * f.h * f.w, 0.0);
  out.final.assign(f.n * f.h * f.w, 0.0);
  out.proto.assign(f.c, 0.0);
  for (std::size_t i = 0; i < f.n; ++i)
    for (std::size_t y = 0; y < f.h; ++y)
      for (std::size_t x = 0; x < f.w; ++x) {
        double pn = 0.0;
        for (std::size_t c = 0; c < f.c; ++c) pn += f.at(i, c, y, x) * f.at(i, c, y, x);
        pn = std::max(std::sqrt(pn), 1e-12);
        double sum = 0.0;
        for (std::size_t m = 0; m < s; ++m) {
          double dn = 0.0, dot = 0.0;
          for (std::size_t c = 0; c < f.c; ++c) {
            dn += seeds[m * f.c + c] * seeds[m * f.c + c];
            dot += f.at(i, c, y, x) * seeds[m * f.c + c];
          }
          dn = std::max(std::sqrt(dn), 1e-12);
          const double cosv = std::clamp(dot / (pn * dn), -1.0, 1.0);
          out.per_seed[((i * s + m) * f.h + y) * f.w + x] = cosv;
          sum += cosv;
        }
        out.final[(i * f.h + y) * f.w + x] = sum / static_cast<double>(s);
      }
  const double count = static_cast<double>(f.n * f.h * f.w);
  for (std::size_t c = 0; c < f.c; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.n; ++i)
      for (std::size_t y = 0; y < f.h; ++y)
        for (std::size_t x = 0; x < f.w; ++x) acc += out.final[(i * f.h + y) * f.w + x] * f.at(i, c, y, x);
    out.proto[c] = acc / count;
  }
  return out;
}

std::vector<double> dpg_prototype(const Array4& f_ext, const std::vector<double>& residual_w,
                                  const std::vector<double>& key_w, const std::vector<double>& key_b,
                                  const std::vector<double>& query_w, const std::vector<double>& query_b) {
  Array4 res = pointwise(f_ext, residual_w, {}, f_ext.c);
  for (std::size_t i = 0; i < res.v.size(); ++i) res.v[i] += f_ext.v[i];
  const auto seeds = seed_select(res, key_w, key_b, query_w, query_b);
  return response_and_prototype(res, seeds.vectors).proto;
}

std::vector<double> readjust_weights(const std::vector<double>& row, double alpha) {
  std::vector<double> w(row.size(), 1.0);
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!(row[j] > 0.0)) continue;
    std::size_t rank = 0;
    for (std::size_t k = 0; k < row.size(); ++k)
      if (row[k] > row[j] || (row[k] == row[j] && k < j)) ++rank;
    w[j] = std::pow(static_cast<double>(rank + 1), alpha);
  }
  return w;
}

std::vector<double> softmax(const std::vector<double>& row) {
  const double mx = *std::max_element(row.begin(), row.end());
  std::vector<double> e(row.size());
  double z = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) z += (e[j] = std::exp(row[j] - mx));
  for (auto& v : e) v /= z;
  return e;
}

Array4 enhance_image(const Array4& fused, const std::vector<double>& conv_w, const std::vector<double>& conv_b,
                     const std::vector<double>& key_w, const std::vector<double>& key_b,
                     const std::vector<double>& query_w, const std::vector<double>& query_b,
                     const std::vector<double>& value_w, const std::vector<double>& value_b, double alpha,
                     bool readjust) {
  Array4 conv = pointwise(fused, conv_w, conv_b, fused.c);
  for (auto& v : conv.v) v = std::max(v, 0.0);
  const Array4 k = pointwise(conv, key_w, key_b, conv.c);
  const Array4 q = pointwise(conv, query_w, query_b, conv.c);
  const Array4 val = pointwise(conv, value_w, value_b, conv.c);
  const std::size_t hw = conv.h * conv.w;
  Array4 out = conv;
  for (std::size_t i = 0; i < hw; ++i) {
    std::vector<double> row(hw);
    for (std::size_t j = 0; j < hw; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < conv.c; ++c) s += k.v[c * hw + i] * q.v[c * hw + j];
      row[j] = s;
    }
    const auto a = softmax(row);
    const auto wts = readjust ? readjust_weights(row, alpha) : std::vector<double>(hw, 1.0);
    for (std::size_t c = 0; c < conv.c; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < hw; ++j) acc += a[j] * wts[j] * val.v[c * hw + j];
      out.v[c * hw + i] += acc;
    }
  }
  return out;
}

double cosine_style(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return 0.5 * (1.0 + dot / std::max(std::sqrt(na * nb), 1e-12));
}

double scl_loss(double cos_c, double cos_b) { return -std::log(cos_c + 1e-5) - std::log(1.0 - cos_b + 1e-5); }

double iou_loss(const std::vector<double>& pred, const std::vector<double>& gt, std::size_t images) {
  const std::size_t per = pred.size() / images;
  double total = 0.0;
  for (std::size_t n = 0; n < images; ++n) {
    double inter = 0.0, sp = 0.0, sg = 0.0;
    for (std::size_t k = n * per; k < (n + 1) * per; ++k) {
      inter += pred[k] * gt[k];
      sp += pred[k];
      sg += gt[k];
    }
    total += (sp == 0.0 && sg == 0.0) ? 1.0 : inter / (sp + sg - inter + 1e-8);
  }
  return 1.0 - total / static_cast<double>(images);
}

double mae(const std::vector<double>& pred, const std::vector<double>& gt) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - gt[i]);
  return acc / static_cast<double>(pred.size());
}

double f_beta_max(const std::vector<double>& pred, const std::vector<double>& gt, double beta_sq) {
  bool any = false;
  for (double g : gt) any = any || g > 0.5;
  if (!any) throw std::domain_error("empty ground truth");
  double best = 0.0;
  for (int t = 0; t < 256; ++t) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double level = std::floor(std::clamp(pred[i], 0.0, 1.0) * 255.0 + 0.5);
      const bool positive = level > t;
      const bool truth = gt[i] > 0.5;
      tp += positive && truth;
      fp += positive && !truth;
      fn += !positive && truth;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f = (beta_sq * p + r) > 0 ? (1 + beta_sq) * p * r / (beta_sq * p + r) : 0.0;
    best = std::max(best, f);
  }
  return best;
}

}  // namespace dcfm::reference
