// Small trainable encoder/decoder standing in for a pretrained backbone.
//
// The encoder is a stack of 3x3 stride-s convolutions with ReLU. The
// decoder standardises its input per image, then walks the stack back up:
// nearest 2x upsampling, concatenation
// with the matching skip (the encoder input for the last level), 3x3 conv
// and ReLU, then a 1x1 head with a sigmoid.

#pragma once

#include <cstddef>
#include <vector>

#include "dcfm/common/parameters.hpp"
#include "dcfm/tensorlab/tensor.hpp"

namespace dcfm::backbone {

struct StageSpec {
  std::size_t channels = 16;
  std::size_t stride = 2;  // 1 or 2
};

struct EncoderConfig {
  std::size_t in_channels = 3;
  std::vector<StageSpec> stages{{16, 2}, {32, 2}, {64, 2}, {64, 2}};

  std::size_t downsample() const;
  std::size_t feature_channels() const { return stages.back().channels; }
  // Throws ShapeError for empty stage lists, zero widths or strides outside {1,2}.
  void validate() const;
};

struct DecoderConfig {
  // Output width of the conv at each level, index 0 = full resolution.
  // Must have one entry per encoder stage.
  std::vector<std::size_t> widths{8, 16, 16, 32};
};

struct EncoderOutput {
  tl::Tensor features;
  // skips[0] is the encoder input, skips[i] the output of stage i-1; the
  // last stage's output is `features` and is not repeated here.
  std::vector<tl::Tensor> skips;
};

class Encoder {
 public:
  Encoder(EncoderConfig config, Rng& rng);

  const EncoderConfig& config() const { return config_; }
  // images [N, in_channels, H, W]; H and W must be divisible by downsample().
  EncoderOutput encode(const tl::Tensor& images) const;
  void append_parameters(ParameterList& out) const;

  std::vector<tl::Tensor>& weights() { return weights_; }
  std::vector<tl::Tensor>& biases() { return biases_; }

 private:
  EncoderConfig config_;
  std::vector<tl::Tensor> weights_;
  std::vector<tl::Tensor> biases_;
};

class Decoder {
 public:
  Decoder(const EncoderConfig& encoder, DecoderConfig config, Rng& rng);

  // enhanced [N, C, h, w] with C = encoder feature channels; returns [N,1,H,W] in (0,1).
  tl::Tensor decode(const tl::Tensor& enhanced, const std::vector<tl::Tensor>& skips) const;
  void append_parameters(ParameterList& out) const;

 private:
  EncoderConfig encoder_;
  DecoderConfig config_;
  std::vector<tl::Tensor> weights_;
  std::vector<tl::Tensor> biases_;
  tl::Tensor head_w_;
  tl::Tensor head_b_;
};

}  // namespace dcfm::backbone
