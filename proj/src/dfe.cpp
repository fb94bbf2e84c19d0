#include "dcfm/dfe.hpp"

#include <cmath>
#include <string>

#include "dcfm/common/errors.hpp"

namespace dcfm::dfe {

DfeParams DfeParams::init(std::size_t channels, Rng& rng) {
  DfeParams p;
  p.conv_w = init_uniform({channels, channels}, channels, rng);
  p.conv_b = init_uniform({channels}, channels, rng);
  p.key_w = init_uniform({channels, channels}, channels, rng);
  p.key_b = init_uniform({channels}, channels, rng);
  p.query_w = init_uniform({channels, channels}, channels, rng);
  p.query_b = init_uniform({channels}, channels, rng);
  p.value_w = init_uniform({channels, channels}, channels, rng);
  p.value_b = init_uniform({channels}, channels, rng);
  return p;
}

void DfeParams::append_parameters(ParameterList& out) const {
  out.push_back({"dfe.conv.weight", conv_w});
  out.push_back({"dfe.conv.bias", conv_b});
  out.push_back({"dfe.key.weight", key_w});
  out.push_back({"dfe.key.bias", key_b});
  out.push_back({"dfe.query.weight", query_w});
  out.push_back({"dfe.query.bias", query_b});
  out.push_back({"dfe.value.weight", value_w});
  out.push_back({"dfe.value.bias", value_b});
}

void validate_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= kMaxAlpha)) {
    throw ConfigError("alpha must lie in (0, 4], got " + std::to_string(alpha));
  }
}

tl::Tensor fuse(const tl::Tensor& f_res, const dpg::ResponseMaps& maps, const dpg::Prototype& proto) {
  return tl::add(tl::mul_spatial(f_res, maps.final), tl::mul_channel(f_res, proto.vector));
}

AttentionBundle readjust_attention(const tl::Tensor& raw, const DfeOptions& options, tl::DecisionTape* tape) {
  AttentionBundle b;
  b.raw = raw;
  b.normalized = tl::softmax_rows(raw);
  const std::size_t rows = raw.dim(0), cols = raw.dim(1);

  // Rank and positivity are frozen together as 2 * rank + (A > 0).
  const auto code = tl::decide(tape, [&] {
    const tl::RankMatrix z = tl::descending_rank(raw);
    std::vector<std::int64_t> c(z.values.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 2 * std::int64_t{z.values[i]} + (raw[i] > 0.0 ? 1 : 0);
    return c;
  });
  b.rank = {rows, cols, std::vector<std::int32_t>(code.size())};
  std::vector<double> weights(rows * cols, 1.0);
  for (std::size_t i = 0; i < code.size(); ++i) {
    b.rank.values[i] = static_cast<std::int32_t>(code[i] / 2);
    const bool positive = (code[i] & 1) != 0;
    if (options.readjust && positive) weights[i] = std::pow(static_cast<double>(b.rank.values[i] + 1), options.alpha);
  }
  b.readjust = tl::Tensor::from({rows, cols}, std::move(weights));
  b.final = tl::mul(b.normalized, b.readjust);
  return b;
}

ImageAttention democratic_attention(const tl::Tensor& fused_image, const DfeParams& params,
                                    const DfeOptions& options, tl::DecisionTape* tape) {
  tl::Tensor x = fused_image;
  if (x.rank() == 3) x = tl::reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  if (x.rank() != 4 || x.dim(0) != 1) {
    throw ShapeError("democratic_attention: expected one image, got " + tl::to_string(fused_image.shape()));
  }
  ImageAttention out;
  out.conv_features = tl::relu(tl::pointwise_conv(x, params.conv_w, params.conv_b));
  const tl::Tensor keys = tl::to_rows(tl::pointwise_conv(out.conv_features, params.key_w, params.key_b));
  const tl::Tensor queries = tl::to_rows(tl::pointwise_conv(out.conv_features, params.query_w, params.query_b));
  out.value_rows = tl::to_rows(tl::pointwise_conv(out.conv_features, params.value_w, params.value_b));
  out.attention = readjust_attention(tl::matmul(keys, tl::transpose(queries)), options, tape);
  return out;
}

tl::Tensor apply_attention(const tl::Tensor& conv_features, const tl::Tensor& value_rows,
                           const tl::Tensor& attention_final) {
  const tl::Tensor mixed = tl::matmul(attention_final, value_rows);
  return tl::add(conv_features, tl::from_rows(mixed, 1, conv_features.dim(2), conv_features.dim(3)));
}

tl::Tensor enhance(const tl::Tensor& fused, const DfeParams& params, const DfeOptions& options,
                   tl::DecisionTape* tape) {
  if (fused.rank() != 4) throw ShapeError("enhance: expected [N,C,H,W], got " + tl::to_string(fused.shape()));
  std::vector<tl::Tensor> images;
  images.reserve(fused.dim(0));
  for (std::size_t n = 0; n < fused.dim(0); ++n) {
    const ImageAttention a = democratic_attention(tl::select_image(fused, n), params, options, tape);
    images.push_back(apply_attention(a.conv_features, a.value_rows, a.attention.final));
  }
  return tl::stack_images(images);
}

}  // namespace dcfm::dfe
