#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hbm/bm_mask.hpp"
#include "hbm/gradcheck.hpp"
#include "hbm/labels.hpp"
#include "hbm/synth.hpp"
#include "hbm/tensor.hpp"

namespace hbm {

struct ModelConfig {
  std::size_t frames = 128;      // T
  std::size_t audio_dim = 16;    // D_a
  std::size_t visual_dim = 16;   // D_v
  std::size_t channels = 32;     // C
  std::size_t durations = 40;    // L, maximum proposal length in frames
  std::size_t samples = 16;      // N, BM samples per proposal
  std::size_t cpg_hidden = 8;    // channels of the CPG 3x3 conv
  std::size_t fpg_hidden = 16;   // channels of the FPG U-Net
  double init_scale = 0.1;       // weights ~ U[-s, s], biases 0

  // Throws ConfigError naming "model.<field>".
  void validate() const;
};

// Every learnable tensor, created in a fixed order.
struct ModelParams {
  // single-modality encoders: conv1d k=3
  Tensor audio_w, audio_b;
  Tensor visual_w, visual_b;
  // cross-attention blocks; AV queries with audio, VA with visual
  Tensor av_q, av_k, av_v;
  Tensor va_q, va_k, va_v;
  // fusion projection 2C -> C and frame classifier C -> 1
  Tensor fuse_w, fuse_b;
  Tensor cls_w, cls_b;
  // CPG: per-sample weights (N), 3x3 conv over (L, T), 1x1 output projection
  Tensor cpg_sample_w;
  Tensor cpg_conv_w, cpg_conv_b;
  Tensor cpg_out_w, cpg_out_b;
  // FPG: two-level U-Net with a bottleneck and a 3-channel head
  Tensor fpg_enc1_w, fpg_enc1_b;
  Tensor fpg_enc2_w, fpg_enc2_b;
  Tensor fpg_mid_w, fpg_mid_b;
  Tensor fpg_dec2_w, fpg_dec2_b;
  Tensor fpg_dec1_w, fpg_dec1_b;
  Tensor fpg_head_w, fpg_head_b;

  // Names are "<group>.<tensor>", e.g. "cpg.conv_w".
  std::vector<NamedTensor> named() const;
};

// Closed form, a pure function of the config:
//   3 C (D_a + D_v) + 2C                      encoders
//   6 C^2                                     attention projections
//   2 C^2 + C + C + 1                         fusion + classifier
//   N + 9 (C+1) Hc + Hc + Hc + 1              CPG
//   3 (C+1) Hf + 2 * 3 Hf^2 + 2 * 6 Hf^2      FPG convs
//     + 5 Hf + 3 Hf + 3                       FPG biases + head
std::size_t parameter_count(const ModelConfig& config);

struct EncodeOutput {
  Tensor f_cf;         // [T x (C+1)]
  Tensor f_av;         // [T x C]
  Tensor f_va;         // [T x C]
  Tensor frame_probs;  // [T]
  Tensor attn_av;      // [T x T], rows sum to 1
  Tensor attn_va;
};

struct ForwardOutput {
  EncodeOutput fwd;
  EncodeOutput bwd;      // computed on the time-reversed streams
  Tensor boundary_map;   // M' [L x T], forward direction only
  Tensor fpg_fwd;        // [T x 3] = (start, end, content)
  Tensor fpg_bwd;        // [T x 3], in reversed time

  BoundaryMap boundary_values() const;
  ProbTriplet triplet(Direction direction) const;
};

ProbTriplet triplet_from(const Tensor& fpg_out, Direction direction);

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const BMSamplingMask& mask() const { return mask_; }

  EncodeOutput encode_and_fuse(const FeatureStream& stream,
                               Direction direction) const;
  Tensor cpg_head(const Tensor& f_cf) const;
  Tensor fpg_head(const Tensor& f_cf) const;
  ForwardOutput forward_full(const FeatureStream& stream) const;

  void zero_grad();

 private:
  void check_stream(const FeatureStream& stream) const;

  ModelConfig config_;
  ModelParams params_;
  BMSamplingMask mask_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary named-tensor table: "HBMP", u32 version, u32 count, then per tensor
// u32 name length, name bytes, u32 rank, u32 dims, f64 values.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
// Rejects missing tensors and shape mismatches against the model's config.
void load_checkpoint(const std::filesystem::path& path, Model& model);

}  // namespace hbm
