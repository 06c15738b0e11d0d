#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hbm/segment.hpp"

namespace hbm {

enum class Direction { forward, backward };

struct FrameLabels {
  std::vector<std::uint8_t> y;  // 1 = fake

  std::vector<double> as_double() const;
  FrameLabels reversed() const;
};

// L x T grid indexed (duration row i, start column j). Row i holds proposals
// of i + 1 frames; cells with j + i + 1 > T are out of range and stay 0.
struct BoundaryMap {
  std::size_t durations = 0;
  std::size_t frames = 0;
  std::vector<double> values;

  BoundaryMap() = default;
  BoundaryMap(std::size_t l, std::size_t t)
      : durations(l), frames(t), values(l * t, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return values[i * frames + j]; }
  double at(std::size_t i, std::size_t j) const {
    return values[i * frames + j];
  }
  bool in_range(std::size_t i, std::size_t j) const {
    return j + i + 1 <= frames;
  }
  Segment proposal(std::size_t i, std::size_t j) const {
    return {j, j + i + 1};
  }
  // 1.0 for in-range cells, 0.0 elsewhere.
  std::vector<double> mask() const;
  std::size_t in_range_count() const;
};

struct ProbTriplet {
  std::vector<double> start;
  std::vector<double> end;
  std::vector<double> content;
  Direction direction = Direction::forward;

  std::size_t frames() const { return start.size(); }
};

// Reverses all three sequences in time, swaps start with end and toggles the
// direction tag: maps a backward-time triplet onto forward time and back.
ProbTriplet align_to_other_direction(const ProbTriplet& p);

FrameLabels build_frame_labels(const StreamAnnotation& ann);

// M[i][j] = max over union-merged fake segments of IoU([j, j+i+1), segment).
BoundaryMap build_boundary_map(const StreamAnnotation& ann,
                               std::size_t durations);

// IoA labels against anchors a_t = [d_f (t - 1/2), d_f (t + 1/2)] for the
// start region r(t_s), end region r(t_e) and content region [t_s, t_e], with
// r(x) = [x - d_f/2, x + d_f/2]. For the backward direction every region is
// mirrored through x -> d_f (T - 1) - x, which carries anchor t onto anchor
// T - 1 - t, so the result is exactly the time reversal of the forward
// labels with start and end exchanged.
ProbTriplet build_prob_triplet(const StreamAnnotation& ann,
                               double interval = 1.0,
                               Direction direction = Direction::forward);

}  // namespace hbm
