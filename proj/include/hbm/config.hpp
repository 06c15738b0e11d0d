#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hbm/inference.hpp"
#include "hbm/losses.hpp"
#include "hbm/model.hpp"
#include "hbm/synth.hpp"

namespace hbm {

enum class OptimizerKind { sgd, adam };

struct OptimConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 0.003;
  double momentum = 0.9;      // sgd only; 0 gives plain steps
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  std::size_t patience = 3;   // epochs without a validation-loss drop before lr halves
  double grad_clip = 5.0;     // global L2 norm cap per step; 0 disables

  void validate() const;  // ConfigError on "optim.<field>"
};

// One JSON file drives every command. Sections and keys:
//   model:     T, C, L, N, D_a, D_v, cpg_hidden, fpg_hidden, init_scale
//   loss:      alpha, m, beta0, beta1, theta
//   optim:     optimizer ("sgd" | "adam"), lr, momentum, adam_beta1,
//              adam_beta2, adam_eps, epochs, batch_size, patience, grad_clip
//   inference: sigma, score_floor, top_k, d_f
//   synth:     count, min_segments, max_segments, min_length, max_length,
//              edge_margin, delta, noise, smoothing, direction_jitter,
//              mix {audio_only, visual_only, both}
//   seed
// Missing keys keep their defaults; unknown keys are rejected. The synthetic
// streams take T, D_a and D_v from the model section.
struct RunConfig {
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  InferenceConfig inference;
  SynthConfig synth;
  std::uint64_t seed = 42;

  void validate() const;
  std::string to_json() const;
};

RunConfig run_config_from_json(const std::string& text, const std::string& source);
RunConfig load_run_config(const std::filesystem::path& path);

// Settings small enough for a finite-difference sweep over every parameter.
RunConfig tiny_config();

}  // namespace hbm
