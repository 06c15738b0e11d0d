#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "hbm/config.hpp"
#include "hbm/eval.hpp"
#include "hbm/inference.hpp"
#include "hbm/losses.hpp"
#include "hbm/model.hpp"
#include "hbm/synth.hpp"

namespace hbm {

struct LossRow {
  std::size_t step = 0;
  double contrastive = 0.0;  // L_FC
  double proposal = 0.0;     // L_CP
  double frame = 0.0;        // L_FP
  double total = 0.0;
};

struct EpochRow {
  std::size_t epoch = 0;
  double train_total = 0.0;
  double val_total = 0.0;
  double learning_rate = 0.0;
};

struct TrainLog {
  std::vector<LossRow> steps;
  std::vector<EpochRow> epochs;
  std::size_t best_epoch = 0;

  std::string loss_csv() const;   // step,L_FC,L_CP,L_FP,total
  std::string epoch_csv() const;  // epoch,train_total,val_total,lr
};

// Applies one update from the gradients accumulated on the leaves.
class Optimizer {
 public:
  Optimizer(const OptimConfig& config, std::vector<NamedTensor> params);

  // Scales the accumulated gradients by `grad_scale`, clips them, steps every
  // parameter and zeroes the gradients.
  void step(double grad_scale);
  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }

 private:
  OptimConfig config_;
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_;
  std::size_t t_ = 0;
};

LossComponents clip_losses(const Model& model, const FeatureStream& features,
                           const ClipTargets& targets, const LossConfig& cfg);

// Mean total loss over `clips`, evaluated without recording a graph.
double mean_loss(const Model& model, const std::vector<const Clip*>& clips,
                 const std::vector<ClipTargets>& targets, const LossConfig& cfg);

using EpochCallback = std::function<void(const EpochRow&)>;

// Mini-batch training with lr halving after `patience` epochs whose
// validation loss fails to beat the best so far. On return `model` holds the
// best-validation parameters. Deterministic given config and data.
TrainLog train(Model& model, const RunConfig& config,
               const std::vector<const Clip*>& train_clips,
               const std::vector<const Clip*>& val_clips,
               const EpochCallback& on_epoch = {});

enum class ScoringMode { bidirectional, forward_only };

// forward_full, fusion (or the forward triplet alone), scoring and Soft-NMS.
std::vector<ScoredProposal> predict_clip(const Model& model,
                                         const FeatureStream& features,
                                         const InferenceConfig& cfg,
                                         ScoringMode mode = ScoringMode::bidirectional);

// Parallel over clips; output order follows `clips`.
std::vector<ClipPrediction> predict_dataset(const Model& model,
                                            const std::vector<const Clip*>& clips,
                                            const InferenceConfig& cfg,
                                            ScoringMode mode = ScoringMode::bidirectional);

std::vector<const Clip*> clips_in_split(const std::vector<Clip>& clips,
                                        const std::string& split);

// Finite-difference check of every parameter tensor against each loss
// (L_FC, L_CP, L_FP, total) on one synthetic clip drawn from `config`.
struct GradcheckRow {
  std::string loss;
  std::string param;
  std::size_t count = 0;
  double max_error = 0.0;
};

inline constexpr double kGradcheckTolerance = 1e-4;

std::vector<GradcheckRow> model_gradcheck(const RunConfig& config);
std::string gradcheck_csv(const std::vector<GradcheckRow>& rows);

}  // namespace hbm
