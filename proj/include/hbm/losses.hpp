#pragma once

#include <vector>

#include "hbm/labels.hpp"
#include "hbm/model.hpp"
#include "hbm/tensor.hpp"

namespace hbm {

struct LossConfig {
  double alpha = 0.1;            // weight of the frame contrastive loss
  double margin = 1.0;           // contrastive margin m
  double beta0 = 0.75;           // focal class-balance weight
  double beta1 = 2.0;            // focal focusing exponent
  double label_threshold = 0.5;  // theta for binarising soft IoA labels

  void validate() const;  // ConfigError on "loss.<field>"
};

// Cross-modal distance per frame, forward plus backward (the backward pair is
// read at the mirrored index); real frames pull d^2 toward 0, fake frames
// push d past the margin. Averaged over frames.
Tensor contrastive_loss(const Tensor& av_fwd, const Tensor& va_fwd,
                        const Tensor& av_bwd, const Tensor& va_bwd,
                        const FrameLabels& labels, const LossConfig& cfg);

// Mean squared error over in-range cells of the boundary map only.
Tensor cpg_loss(const Tensor& predicted, const BoundaryMap& truth);

// Class-balanced focal BCE against soft labels binarised at theta:
// mean_t w_t (1 - p_hat_t)^beta1 * -log(p_hat_t).
Tensor focal_loss(const Tensor& predicted, const std::vector<double>& truth,
                  const LossConfig& cfg);

// Sum of the six focal terms: {start, end, content} x {forward, backward}.
// `pred_*` are [T x 3] FPG outputs, each in its own time order.
Tensor fpg_loss(const Tensor& pred_fwd, const Tensor& pred_bwd,
                const ProbTriplet& true_fwd, const ProbTriplet& true_bwd,
                const LossConfig& cfg);

struct LossComponents {
  Tensor contrastive;  // L_FC
  Tensor proposal;     // L_CP
  Tensor frame;        // L_FP
};

// alpha * L_FC + L_CP + L_FP
Tensor total_loss(const LossComponents& parts, const LossConfig& cfg);

// Ground truth for one clip in the form every loss expects.
struct ClipTargets {
  FrameLabels frame_labels;
  BoundaryMap boundary;
  ProbTriplet triplet_fwd;
  ProbTriplet triplet_bwd;
};

ClipTargets build_targets(const StreamAnnotation& ann, std::size_t durations,
                          double interval);

// Runs all three losses on one forward pass.
LossComponents compute_losses(const ForwardOutput& out,
                              const ClipTargets& targets,
                              const LossConfig& cfg);

}  // namespace hbm
