#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hbm/labels.hpp"
#include "hbm/segment.hpp"

namespace hbm {

struct ScoredProposal {
  Segment segment;
  double score = 0.0;

  bool operator==(const ScoredProposal&) const = default;
};

struct InferenceConfig {
  double sigma = 0.5;        // Gaussian Soft-NMS decay
  double score_floor = 1e-4;
  std::size_t top_k = 100;
  double interval = 1.0;     // d_f used for the FPG labels

  void validate() const;     // ConfigError on "inference.<field>"
};

// Geometric-mean fusion. `bwd` is in reversed time: it is first reversed and
// its start/end channels swapped, then fused = sqrt(fwd * aligned).
ProbTriplet fuse_bidirectional(const ProbTriplet& fwd, const ProbTriplet& bwd);

// One proposal per in-range cell (i, j), covering [j, j + i + 1):
//   score = M'[i][j] * start[j] * end[e] * mean(content[j .. j + i])
// where e = j + i + 1 is the exclusive end frame (clamped to T - 1 for
// proposals that reach the clip end). Emitted row-major over (i, j).
std::vector<ScoredProposal> score_proposals(const BoundaryMap& predicted,
                                            const ProbTriplet& fused);

// Gaussian Soft-NMS: repeatedly take the best remaining proposal, decay the
// rest by exp(-IoU^2 / sigma), drop those under the floor; stops after top_k
// selections. Output is sorted by score descending (ties: start, then end).
std::vector<ScoredProposal> soft_nms(std::vector<ScoredProposal> proposals,
                                     double sigma, double score_floor,
                                     std::size_t top_k);

struct ClipPrediction {
  std::string id;
  std::vector<ScoredProposal> proposals;
};

// Prediction file: [{"id": str, "proposals": [[start, end, score], ...]}].
std::string predictions_to_json(const std::vector<ClipPrediction>& preds);
std::vector<ClipPrediction> predictions_from_json(const std::string& text,
                                                  const std::string& source);

}  // namespace hbm
