#include "dcfm/pipeline/model.hpp"

#include <algorithm>

#include "dcfm/common/errors.hpp"

namespace dcfm::pipeline {

namespace {

// Independent streams per component so that changing one block's shape
// leaves the others' initial values alone.
Rng component_rng(std::uint64_t seed, std::uint64_t component) { return Rng(mix_seed(seed, component)); }

backbone::Encoder make_encoder(const ModelConfig& c, std::uint64_t seed) {
  auto rng = component_rng(seed, 1);
  return backbone::Encoder(c.encoder, rng);
}

dpg::DpgParams make_dpg(const ModelConfig& c, std::uint64_t seed) {
  auto rng = component_rng(seed, 2);
  return dpg::DpgParams::init(c.encoder.feature_channels(), rng);
}

dfe::DfeParams make_dfe(const ModelConfig& c, std::uint64_t seed) {
  auto rng = component_rng(seed, 3);
  return dfe::DfeParams::init(c.encoder.feature_channels(), rng);
}

backbone::Decoder make_decoder(const ModelConfig& c, std::uint64_t seed) {
  auto rng = component_rng(seed, 4);
  return backbone::Decoder(c.encoder, c.decoder, rng);
}

}  // namespace

void ModelConfig::validate() const {
  encoder.validate();
  if (decoder.widths.size() != encoder.stages.size()) {
    throw ConfigError("decoder needs one width per encoder stage");
  }
  dfe::validate_alpha(dfe.alpha);
}

Model::Model(ModelConfig config, std::uint64_t seed)
    : config_((config.validate(), std::move(config))),
      encoder_(make_encoder(config_, seed)),
      dpg_(make_dpg(config_, seed)),
      dfe_(make_dfe(config_, seed)),
      decoder_(make_decoder(config_, seed)) {}

ForwardResult Model::forward(const tl::Tensor& images, tl::DecisionTape* tape) const {
  ForwardResult r;
  r.encoded = encoder_.encode(images);
  if (config_.use_dpg) {
    r.dpg = dpg::run_dpg(r.encoded.features, dpg_, tape);
    r.fused = dfe::fuse(r.dpg->residual, r.dpg->maps, r.dpg->proto);
  } else {
    r.fused = r.encoded.features;
  }
  r.enhanced = dfe::enhance(r.fused, dfe_, config_.dfe, tape);
  r.pred = decoder_.decode(r.enhanced, r.encoded.skips);
  return r;
}

ParameterList Model::parameters() const {
  ParameterList out;
  encoder_.append_parameters(out);
  dpg_.append_parameters(out);
  dfe_.append_parameters(out);
  decoder_.append_parameters(out);
  return out;
}

tl::Tensor images_to_tensor(const std::vector<datagen::RgbImage>& images) {
  if (images.empty()) throw ShapeError("images_to_tensor: empty image list");
  const std::size_t w = images.front().width, h = images.front().height;
  std::vector<double> data;
  data.reserve(images.size() * 3 * h * w);
  for (const auto& img : images) {
    if (img.width != w || img.height != h) throw ShapeError("images_to_tensor: images differ in size");
    data.insert(data.end(), img.planes.begin(), img.planes.end());
  }
  return tl::Tensor::from({images.size(), 3, h, w}, std::move(data));
}

tl::Tensor masks_to_tensor(const std::vector<datagen::GrayImage>& masks) {
  if (masks.empty()) throw ShapeError("masks_to_tensor: empty mask list");
  const std::size_t w = masks.front().width, h = masks.front().height;
  std::vector<double> data;
  data.reserve(masks.size() * h * w);
  for (const auto& m : masks) {
    if (m.width != w || m.height != h) throw ShapeError("masks_to_tensor: masks differ in size");
    data.insert(data.end(), m.pixels.begin(), m.pixels.end());
  }
  return tl::Tensor::from({masks.size(), 1, h, w}, std::move(data));
}

datagen::GrayImage prediction_image(const tl::Tensor& pred, std::size_t n) {
  const std::size_t h = pred.dim(2), w = pred.dim(3);
  datagen::GrayImage out(w, h);
  const auto src = pred.data().subspan(n * h * w, h * w);
  std::copy(src.begin(), src.end(), out.pixels.begin());
  return out;
}

}  // namespace dcfm::pipeline
