#include "dcfm/pipeline/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "dcfm/backbone/checkpoint.hpp"
#include "dcfm/common/errors.hpp"
#include "dcfm/tensorlab/ops.hpp"

namespace dcfm::pipeline {

Objective training_objective(const Model& model, const tl::Tensor& images, const tl::Tensor& masks, double lambda,
                             tl::DecisionTape* tape) {
  Objective o;
  o.forward = model.forward(images, tape);
  o.iou = losses::iou_loss(o.forward.pred, masks);
  o.report.lambda = lambda;
  o.report.iou = o.iou.item();
  if (o.forward.dpg) {
    const auto pair = scl::erase_and_prototype(o.forward.encoded.features, masks, model.dpg_params(), tape);
    o.scl = scl::self_contrastive_loss(o.forward.dpg->proto.vector, pair);
    o.total = losses::total_loss(o.iou, o.scl->loss, lambda);
    o.report.sc = o.scl->loss.item();
  } else {
    o.total = losses::total_loss(o.iou, tl::Tensor::scalar(0.0), lambda);
  }
  o.report.total = o.total.item();
  return o;
}

Adam::Adam(ParameterList params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.value.numel(), 0.0);
    v_.emplace_back(p.value.numel(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  double grad_scale = 1.0;
  if (config_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_)
      if (p.trainable)
        for (double g : p.value.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > config_.max_grad_norm) grad_scale = config_.max_grad_norm / norm;
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.trainable) continue;
    const double lr = p.group == ParamGroup::Extractor ? config_.lr_extractor : config_.lr_head;
    auto w = p.value.mutable_data();
    const auto g = p.value.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double grad = grad_scale * g[k] + config_.weight_decay * w[k];
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * grad;
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * grad * grad;
      w[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config_.eps);
    }
  }
}

Batch SyntheticSource::sample(std::size_t group, std::size_t epoch, Rng&) const {
  const auto g = dataset_.training_group(group, epoch);
  return {g.group_id, images_to_tensor(g.images), masks_to_tensor(g.masks)};
}

DirectorySource::DirectorySource(const std::filesystem::path& root, std::size_t group_size)
    : root_(root), group_size_(group_size) {
  if (group_size_ < 2) throw ConfigError("group size must be at least 2");
  for (auto& g : datagen::list_dataset(root_)) {
    std::vector<std::string> masked;
    for (const auto& stem : g.stems)
      if (std::filesystem::exists(root_ / g.group_id / (stem + "_gt.pgm"))) masked.push_back(stem);
    if (masked.size() < 2) continue;
    g.stems = std::move(masked);
    groups_.push_back(std::move(g));
  }
  if (groups_.empty()) throw IoError("no group under " + root_.string() + " has two or more images with masks");
}

Batch DirectorySource::sample(std::size_t group, std::size_t, Rng& rng) const {
  const auto& g = groups_.at(group);
  auto order = shuffled_indices(g.stems.size(), rng);
  order.resize(std::min(order.size(), group_size_));
  std::sort(order.begin(), order.end());
  std::vector<datagen::RgbImage> images;
  std::vector<datagen::GrayImage> masks;
  for (auto i : order) {
    const auto dir = root_ / g.group_id;
    images.push_back(datagen::read_ppm(dir / (g.stems[i] + ".ppm")));
    masks.push_back(datagen::read_pgm(dir / (g.stems[i] + "_gt.pgm")));
  }
  return {g.group_id, images_to_tensor(images), masks_to_tensor(masks)};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::string format_log_row(const EpisodeLog& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%s,%.9g,%.9g,%.9g,%.9g,%.9g", r.episode, r.epoch, r.group_id.c_str(),
                r.l_iou, r.l_sc, r.cos_c, r.cos_b, r.l_tot);
  return buf;
}

TrainSummary train(Model& model, const GroupSource& source, const TrainOptions& options, std::ostream* loss_log,
                   const std::function<void(const EpisodeLog&)>& on_episode) {
  if (options.lambda < 0.0 || !std::isfinite(options.lambda)) throw ConfigError("lambda must be finite and >= 0");
  const auto params = model.parameters();
  Adam adam(params, options.adam);
  Rng rng(options.seed);
  TrainSummary summary;
  if (loss_log) *loss_log << kLossLogHeader << '\n';

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (const auto group : shuffled_indices(source.size(), rng)) {
      const Batch batch = source.sample(group, epoch, rng);
      const Objective o = training_objective(model, batch.images, batch.masks, options.lambda);

      EpisodeLog row;
      row.episode = summary.episodes;
      row.epoch = epoch;
      row.group_id = batch.group_id;
      row.l_iou = o.report.iou;
      row.l_sc = o.report.sc;
      row.cos_c = o.scl ? o.scl->cos_c : std::nan("");
      row.cos_b = o.scl ? o.scl->cos_b : std::nan("");
      row.l_tot = o.report.total;
      if (!std::isfinite(row.l_tot)) {
        throw NonFiniteLossError("non-finite loss at episode " + std::to_string(row.episode) + " (group " +
                                 row.group_id + "): iou " + std::to_string(row.l_iou) + ", sc " +
                                 std::to_string(row.l_sc));
      }

      adam.zero_grad();
      o.total.backward();
      adam.step();

      ++summary.episodes;
      summary.last = row;
      if (loss_log) *loss_log << format_log_row(row) << '\n';
      if (on_episode) on_episode(row);
      if (options.checkpoint && options.checkpoint_every && summary.episodes % options.checkpoint_every == 0) {
        backbone::write_checkpoint(*options.checkpoint, params);
      }
    }
  }
  if (options.checkpoint) backbone::write_checkpoint(*options.checkpoint, params);
  if (loss_log) loss_log->flush();
  return summary;
}

}  // namespace dcfm::pipeline
