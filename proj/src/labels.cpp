#include "hbm/labels.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace hbm {

std::vector<double> FrameLabels::as_double() const {
  return {y.begin(), y.end()};
}

FrameLabels FrameLabels::reversed() const {
  return {{y.rbegin(), y.rend()}};
}

std::vector<double> BoundaryMap::mask() const {
  std::vector<double> m(values.size(), 0.0);
  for (std::size_t i = 0; i < durations; ++i) {
    for (std::size_t j = 0; j < frames; ++j) {
      if (in_range(i, j)) m[i * frames + j] = 1.0;
    }
  }
  return m;
}

std::size_t BoundaryMap::in_range_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < durations && i < frames; ++i) n += frames - i;
  return n;
}

ProbTriplet align_to_other_direction(const ProbTriplet& p) {
  ProbTriplet out;
  out.start.assign(p.end.rbegin(), p.end.rend());
  out.end.assign(p.start.rbegin(), p.start.rend());
  out.content.assign(p.content.rbegin(), p.content.rend());
  out.direction = p.direction == Direction::forward ? Direction::backward
                                                    : Direction::forward;
  return out;
}

FrameLabels build_frame_labels(const StreamAnnotation& ann) {
  FrameLabels labels{std::vector<std::uint8_t>(ann.num_frames, 0)};
  for (const auto* list : {&ann.audio_fake, &ann.visual_fake}) {
    for (const auto& s : *list) {
      const std::size_t end = std::min(s.end, ann.num_frames);
      for (std::size_t t = s.start; t < end; ++t) labels.y[t] = 1;
    }
  }
  return labels;
}

BoundaryMap build_boundary_map(const StreamAnnotation& ann,
                               std::size_t durations) {
  if (durations == 0) {
    throw std::invalid_argument("build_boundary_map: L must be >= 1");
  }
  const auto truth = ann.fake_union();
  BoundaryMap map(durations, ann.num_frames);
  for (std::size_t i = 0; i < durations; ++i) {
    for (std::size_t j = 0; j < ann.num_frames; ++j) {
      if (!map.in_range(i, j)) continue;
      const Segment anchor = map.proposal(i, j);
      double best = 0.0;
      for (const auto& g : truth) best = std::max(best, iou(anchor, g));
      map.at(i, j) = best;
    }
  }
  return map;
}

namespace {

struct Interval {
  double lo;
  double hi;
};

double overlap(const Interval& a, const Interval& b) {
  return std::max(0.0, std::min(a.hi, b.hi) - std::max(a.lo, b.lo));
}

}  // namespace

ProbTriplet build_prob_triplet(const StreamAnnotation& ann, double interval,
                               Direction direction) {
  if (!(interval > 0.0)) {
    throw std::invalid_argument("build_prob_triplet: d_f must be > 0, got " +
                                std::to_string(interval));
  }
  const std::size_t T = ann.num_frames;
  const double half = interval / 2.0;
  const double mirror = interval * (static_cast<double>(T) - 1.0);

  std::vector<Interval> starts, ends, contents;
  for (const auto& seg : ann.fake_union()) {
    double s = static_cast<double>(seg.start);
    double e = static_cast<double>(seg.end);
    if (direction == Direction::backward) {
      const double rs = mirror - e;
      e = mirror - s;
      s = rs;
    }
    starts.push_back({s - half, s + half});
    ends.push_back({e - half, e + half});
    contents.push_back({s, e});
  }

  ProbTriplet p;
  p.direction = direction;
  p.start.assign(T, 0.0);
  p.end.assign(T, 0.0);
  p.content.assign(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const double c = static_cast<double>(t);
    const Interval anchor{interval * (c - 0.5), interval * (c + 0.5)};
    const double dur = anchor.hi - anchor.lo;
    auto best = [&](const std::vector<Interval>& regions) {
      double m = 0.0;
      for (const auto& r : regions) m = std::max(m, overlap(anchor, r) / dur);
      return m;
    };
    p.start[t] = best(starts);
    p.end[t] = best(ends);
    p.content[t] = best(contents);
  }
  return p;
}

}  // namespace hbm
