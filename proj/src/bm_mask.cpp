#include "hbm/bm_mask.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hbm {

BMSamplingMask::BMSamplingMask(std::size_t durations, std::size_t frames,
                               std::size_t samples)
    : durations_(durations),
      frames_(frames),
      samples_(samples),
      taps_(durations * frames * samples) {
  if (samples < 2) {
    throw std::invalid_argument("build_sampling_mask: N must be >= 2, got " +
                                std::to_string(samples));
  }
  for (std::size_t i = 0; i < durations; ++i) {
    for (std::size_t j = 0; j < frames; ++j) {
      if (!in_range(i, j)) continue;
      for (std::size_t n = 0; n < samples; ++n) {
        // Uniform over [j, j + i], both endpoints included.
        const double pos =
            static_cast<double>(j) +
            static_cast<double>(n * i) / static_cast<double>(samples - 1);
        const double base = std::floor(pos);
        const double frac = pos - base;
        Tap& t = taps_[(i * frames + j) * samples + n];
        t.lo = static_cast<std::size_t>(base);
        if (frac > 0.0) {
          t.hi = t.lo + 1;
          t.w_lo = 1.0 - frac;
          t.w_hi = frac;
        } else {
          t.hi = t.lo;
          t.w_lo = 1.0;
          t.w_hi = 0.0;
        }
      }
    }
  }
}

double BMSamplingMask::weight(std::size_t n, std::size_t t, std::size_t i,
                              std::size_t j) const {
  if (!in_range(i, j)) return 0.0;
  const Tap& tp = tap(i, j, n);
  double w = 0.0;
  if (tp.lo == t) w += tp.w_lo;
  if (tp.hi == t) w += tp.w_hi;
  return w;
}

std::size_t BMSamplingMask::in_range_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < durations_; ++i) {
    if (i < frames_) count += frames_ - i;
  }
  return count;
}

BMSamplingMask build_sampling_mask(std::size_t durations, std::size_t frames,
                                   std::size_t samples) {
  return BMSamplingMask(durations, frames, samples);
}

}  // namespace hbm
