#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hbm/segment.hpp"
#include "hbm/tensor.hpp"

namespace hbm {

// Per-frame audio and visual features sharing the frame count T.
struct FeatureStream {
  Tensor audio;   // [T x D_a]
  Tensor visual;  // [T x D_v]

  std::size_t frames() const { return audio.dim(0); }
  // Time-reversed copy of both streams.
  FeatureStream reversed() const;
};

struct Clip {
  FeatureStream features;
  StreamAnnotation annotation;
  std::string split = "train";
};

// Probabilities of each manipulation type for an injected segment.
struct ManipulationMix {
  double audio_only = 1.0 / 3.0;
  double visual_only = 1.0 / 3.0;
  double both = 1.0 / 3.0;
};

struct SynthConfig {
  std::size_t count = 275;
  std::size_t num_frames = 128;
  std::size_t audio_dim = 16;
  std::size_t visual_dim = 16;
  std::size_t min_segments = 1;
  std::size_t max_segments = 3;
  std::size_t min_length = 8;
  std::size_t max_length = 32;
  // Real frames kept at each clip edge, and between consecutive segments.
  std::size_t edge_margin = 1;
  ManipulationMix mix;
  double shift = 1.5;           // mean-shift magnitude on manipulated frames
  double noise = 0.5;           // std of the real-frame process
  double smoothing = 0.5;       // AR(1) coefficient of the real-frame process
  double direction_jitter = 0.5;  // per-segment spread of the shift direction

  // Throws ConfigError naming the field ("synth.<name>").
  void validate() const;

  // Union fake-frame fraction implied by the length and count ranges, valid
  // when the largest draw always fits in the clip.
  double expected_fake_fraction() const;
};

// Deterministic given (config, seed); clip k uses its own RNG stream derived
// from (seed, k). Features are f32-representable.
std::vector<Clip> generate_dataset(const SynthConfig& config,
                                   std::uint64_t seed);

// Splits in order train : val : test = 8 : 1 : 2 (floor for train and val).
void assign_splits(std::vector<Clip>& clips);

}  // namespace hbm
