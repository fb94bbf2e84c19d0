// Training objective, optimiser and episode loop.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcfm/datagen/generator.hpp"
#include "dcfm/losses.hpp"
#include "dcfm/pipeline/model.hpp"
#include "dcfm/scl.hpp"

namespace dcfm::pipeline {

struct Objective {
  ForwardResult forward;
  tl::Tensor iou;
  tl::Tensor total;
  // Absent when the model has no prototype stage; the contrastive term is 0.
  std::optional<scl::SclLossValue> scl;
  losses::LossReport report;
};

// Forward pass plus IoU and self-contrastive terms. Tape order: the
// inference decisions, then the co-salient and background prototype passes.
Objective training_objective(const Model& model, const tl::Tensor& images, const tl::Tensor& masks,
                             double lambda, tl::DecisionTape* tape = nullptr);

struct AdamConfig {
  double lr_extractor = 1e-5;
  double lr_head = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Added to the gradient (coupled L2), as in the classic formulation.
  double weight_decay = 1e-4;
  // Rescales the raw gradients of trainable parameters so their global L2
  // norm is at most this value; 0 disables clipping.
  double max_grad_norm = 0.0;
};

class Adam {
 public:
  Adam(ParameterList params, AdamConfig config);

  void zero_grad();
  void step();
  std::size_t steps() const { return t_; }

 private:
  ParameterList params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct Batch {
  std::string group_id;
  tl::Tensor images;  // [N,3,H,W]
  tl::Tensor masks;   // [N,1,H,W]
};

// A pool of training groups; `sample` draws the batch for one episode.
class GroupSource {
 public:
  virtual ~GroupSource() = default;
  virtual std::size_t size() const = 0;
  virtual Batch sample(std::size_t group, std::size_t epoch, Rng& rng) const = 0;
};

// Fresh synthetic images for every (group, epoch).
class SyntheticSource : public GroupSource {
 public:
  explicit SyntheticSource(datagen::SyntheticDataset dataset) : dataset_(std::move(dataset)) {}
  std::size_t size() const override { return dataset_.size(); }
  Batch sample(std::size_t group, std::size_t epoch, Rng& rng) const override;
  const datagen::SyntheticDataset& dataset() const { return dataset_; }

 private:
  datagen::SyntheticDataset dataset_;
};

// Groups on disk; each episode draws group_size distinct images of a group
// (all of them when the group is smaller). Groups need >= 2 masked images.
class DirectorySource : public GroupSource {
 public:
  DirectorySource(const std::filesystem::path& root, std::size_t group_size);
  std::size_t size() const override { return groups_.size(); }
  Batch sample(std::size_t group, std::size_t epoch, Rng& rng) const override;

 private:
  std::filesystem::path root_;
  std::size_t group_size_;
  std::vector<datagen::GroupFiles> groups_;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpisodeLog {
  std::size_t episode = 0;
  std::size_t epoch = 0;
  std::string group_id;
  double l_iou = 0.0;
  double l_sc = 0.0;
  double cos_c = 0.0;
  double cos_b = 0.0;
  double l_tot = 0.0;
};

inline constexpr const char* kLossLogHeader = "episode,epoch,group,l_iou,l_sc,cos_c,cos_b,l_tot";
std::string format_log_row(const EpisodeLog& row);

struct TrainOptions {
  std::size_t epochs = 200;
  double lambda = losses::kDefaultLambda;
  AdamConfig adam;
  std::uint64_t seed = 1;
  // Episodes between checkpoints; 0 writes only the final one.
  std::size_t checkpoint_every = 0;
  std::optional<std::filesystem::path> checkpoint;
};

struct TrainSummary {
  std::size_t episodes = 0;
  EpisodeLog last;
};

// One epoch visits every group once in a seeded random order. Throws
// NonFiniteLossError (after naming the episode) if the loss stops being
// finite; no update is applied for that episode.
TrainSummary train(Model& model, const GroupSource& source, const TrainOptions& options,
                   std::ostream* loss_log = nullptr,
                   const std::function<void(const EpisodeLog&)>& on_episode = {});

// Fisher-Yates with the portable Rng.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

}  // namespace dcfm::pipeline
