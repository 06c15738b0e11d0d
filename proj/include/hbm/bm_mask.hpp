#pragma once

#include <cstddef>
#include <vector>

namespace hbm {

// Boundary-matching sampling mask W over (N, T, L, T), stored sparsely: each
// of the N samples of proposal (i, j) touches at most two frames via linear
// interpolation. Proposal (i, j) spans frames [j, j + i + 1).
class BMSamplingMask {
 public:
  struct Tap {
    std::size_t lo = 0;
    std::size_t hi = 0;
    double w_lo = 0.0;
    double w_hi = 0.0;
  };

  BMSamplingMask() = default;
  BMSamplingMask(std::size_t durations, std::size_t frames,
                 std::size_t samples);

  std::size_t durations() const { return durations_; }
  std::size_t frames() const { return frames_; }
  std::size_t samples() const { return samples_; }

  bool in_range(std::size_t i, std::size_t j) const {
    return j + i + 1 <= frames_;
  }
  const Tap& tap(std::size_t i, std::size_t j, std::size_t n) const {
    return taps_[(i * frames_ + j) * samples_ + n];
  }

  // Dense view W[n, t, i, j].
  double weight(std::size_t n, std::size_t t, std::size_t i,
                std::size_t j) const;

  // Number of in-range (i, j) cells: sum over i of (T - i), clipped at 0.
  std::size_t in_range_count() const;

 private:
  std::size_t durations_ = 0;
  std::size_t frames_ = 0;
  std::size_t samples_ = 0;
  std::vector<Tap> taps_;
};

BMSamplingMask build_sampling_mask(std::size_t durations, std::size_t frames,
                                   std::size_t samples);

}  // namespace hbm
