// End-to-end network: encoder -> prototype generation -> fusion ->
// enhancement -> decoder. The forward pass here is the inference path and
// takes no masks.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dcfm/backbone/backbone.hpp"
#include "dcfm/datagen/image.hpp"
#include "dcfm/dfe.hpp"
#include "dcfm/dpg.hpp"

namespace dcfm::pipeline {

struct ModelConfig {
  backbone::EncoderConfig encoder;
  backbone::DecoderConfig decoder;
  // false: the prototype stage is an identity and f_ext goes straight to
  // enhancement (ablation baseline).
  bool use_dpg = true;
  dfe::DfeOptions dfe;

  // Throws ConfigError / ShapeError.
  void validate() const;
};

struct ForwardResult {
  backbone::EncoderOutput encoded;
  std::optional<dpg::DpgOutput> dpg;
  tl::Tensor fused;
  tl::Tensor enhanced;
  tl::Tensor pred;  // [N,1,H,W] in (0,1)
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const dpg::DpgParams& dpg_params() const { return dpg_; }
  const dfe::DfeParams& dfe_params() const { return dfe_; }

  // images [N,3,H,W]. Decisions (seeds, ranks) go through `tape` in order:
  // seed selection, then one attention entry per image.
  ForwardResult forward(const tl::Tensor& images, tl::DecisionTape* tape = nullptr) const;

  // Stable order and names; this is the checkpoint content.
  ParameterList parameters() const;

 private:
  ModelConfig config_;
  backbone::Encoder encoder_;
  dpg::DpgParams dpg_;
  dfe::DfeParams dfe_;
  backbone::Decoder decoder_;
};

// Same-sized images to [N,3,H,W] / masks to [N,1,H,W].
tl::Tensor images_to_tensor(const std::vector<datagen::RgbImage>& images);
tl::Tensor masks_to_tensor(const std::vector<datagen::GrayImage>& masks);
// Image n of a [N,1,H,W] prediction.
datagen::GrayImage prediction_image(const tl::Tensor& pred, std::size_t n);

}  // namespace dcfm::pipeline
