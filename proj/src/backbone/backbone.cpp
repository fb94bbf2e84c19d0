#include "dcfm/backbone/backbone.hpp"

#include <string>

#include "dcfm/tensorlab/ops.hpp"

namespace dcfm::backbone {

std::size_t EncoderConfig::downsample() const {
  std::size_t f = 1;
  for (const auto& s : stages) f *= s.stride;
  return f;
}

void EncoderConfig::validate() const {
  if (stages.empty()) throw ShapeError("encoder needs at least one stage");
  if (in_channels == 0) throw ShapeError("encoder input channels must be positive");
  for (const auto& s : stages) {
    if (s.channels == 0) throw ShapeError("encoder stage width must be positive");
    if (s.stride != 1 && s.stride != 2) throw ShapeError("encoder stage stride must be 1 or 2");
  }
}

Encoder::Encoder(EncoderConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  std::size_t in = config_.in_channels;
  for (const auto& s : config_.stages) {
    weights_.push_back(init_uniform({s.channels, in, 3, 3}, in * 9, rng));
    biases_.push_back(init_uniform({s.channels}, in * 9, rng));
    in = s.channels;
  }
}

EncoderOutput Encoder::encode(const tl::Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != config_.in_channels) {
    throw ShapeError("encode: expected [N," + std::to_string(config_.in_channels) + ",H,W], got " +
                     tl::to_string(images.shape()));
  }
  const std::size_t f = config_.downsample();
  if (images.dim(2) % f != 0 || images.dim(3) % f != 0) {
    throw ShapeError("encode: spatial extents " + tl::to_string(images.shape()) +
                     " not divisible by downsample factor " + std::to_string(f));
  }
  EncoderOutput out;
  out.skips.push_back(images);
  tl::Tensor x = images;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    x = tl::relu(tl::conv2d(x, weights_[i], biases_[i], config_.stages[i].stride, 1));
    if (i + 1 < weights_.size()) out.skips.push_back(x);
  }
  out.features = x;
  return out;
}

void Encoder::append_parameters(ParameterList& out) const {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back({"encoder.stage" + std::to_string(i) + ".weight", weights_[i], ParamGroup::Extractor});
    out.push_back({"encoder.stage" + std::to_string(i) + ".bias", biases_[i], ParamGroup::Extractor});
  }
}

Decoder::Decoder(const EncoderConfig& encoder, DecoderConfig config, Rng& rng)
    : encoder_(encoder), config_(std::move(config)) {
  encoder_.validate();
  const std::size_t levels = encoder_.stages.size();
  if (config_.widths.size() != levels) {
    throw ShapeError("decoder needs " + std::to_string(levels) + " widths, got " +
                     std::to_string(config_.widths.size()));
  }
  weights_.resize(levels);
  biases_.resize(levels);
  std::size_t in = encoder_.feature_channels();
  for (std::size_t level = levels; level-- > 0;) {
    const std::size_t skip = level == 0 ? encoder_.in_channels : encoder_.stages[level - 1].channels;
    const std::size_t fan_in = (in + skip) * 9;
    weights_[level] = init_uniform({config_.widths[level], in + skip, 3, 3}, fan_in, rng);
    biases_[level] = init_uniform({config_.widths[level]}, fan_in, rng);
    in = config_.widths[level];
  }
  head_w_ = init_uniform({1, in}, in, rng);
  head_b_ = init_uniform({1}, in, rng);
}

tl::Tensor Decoder::decode(const tl::Tensor& enhanced, const std::vector<tl::Tensor>& skips) const {
  const std::size_t levels = encoder_.stages.size();
  if (skips.size() != levels) {
    throw ShapeError("decode: expected " + std::to_string(levels) + " skips, got " + std::to_string(skips.size()));
  }
  // The attention stage can rescale its output by orders of magnitude;
  // standardising keeps the decoder out of saturation.
  tl::Tensor x = tl::standardize_images(enhanced);
  for (std::size_t level = levels; level-- > 0;) {
    if (encoder_.stages[level].stride == 2) x = tl::upsample2x(x);
    const tl::Tensor& skip = skips[level];
    if (skip.rank() != 4 || skip.dim(0) != x.dim(0) || skip.dim(2) != x.dim(2) || skip.dim(3) != x.dim(3)) {
      throw ShapeError("decode: skip " + std::to_string(level) + " has shape " + tl::to_string(skip.shape()) +
                       ", expected spatial match with " + tl::to_string(x.shape()));
    }
    x = tl::relu(tl::conv2d(tl::concat_channels(x, skip), weights_[level], biases_[level], 1, 1));
  }
  return tl::sigmoid(tl::pointwise_conv(x, head_w_, head_b_));
}

void Decoder::append_parameters(ParameterList& out) const {
  for (std::size_t level = weights_.size(); level-- > 0;) {
    out.push_back({"decoder.level" + std::to_string(level) + ".weight", weights_[level], ParamGroup::Head});
    out.push_back({"decoder.level" + std::to_string(level) + ".bias", biases_[level], ParamGroup::Head});
  }
  out.push_back({"decoder.head.weight", head_w_, ParamGroup::Head});
  out.push_back({"decoder.head.bias", head_b_, ParamGroup::Head});
}

}  // namespace dcfm::backbone
