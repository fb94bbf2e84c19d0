// Held-out scoring of a model on ground-truth groups.

#pragma once

#include <span>
#include <vector>

#include "dcfm/datagen/generator.hpp"
#include "dcfm/pipeline/model.hpp"

namespace dcfm::pipeline {

// I / (U + 1e-8) with the soft intersection and union of the loss; 1 when
// both maps are empty.
double soft_iou(std::span<const double> pred, std::span<const double> gt);

struct EvalSummary {
  std::size_t images = 0;
  double soft_iou = 0.0;  // mean over images
  double mae = 0.0;       // mean over images
  double fmax = 0.0;      // mean over images with a non-empty mask
  std::size_t fmax_images = 0;
};

// Each group is one forward pass; reductions run in group, then image order.
EvalSummary evaluate_groups(const Model& model, const std::vector<datagen::GroupSample>& groups);

}  // namespace dcfm::pipeline
