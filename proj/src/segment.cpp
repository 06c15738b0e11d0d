#include "hbm/segment.hpp"

#include <algorithm>
#include <stdexcept>

namespace hbm {

bool valid_segment(const Segment& s, std::size_t num_frames) {
  return s.start < s.end && s.end <= num_frames;
}

double iou(const Segment& a, const Segment& b) {
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end, b.end);
  const std::size_t inter = hi > lo ? hi - lo : 0;
  const std::size_t uni = a.length() + b.length() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Segment> merge_union(std::vector<Segment> segments) {
  std::sort(segments.begin(), segments.end());
  std::vector<Segment> out;
  for (const auto& s : segments) {
    if (!out.empty() && s.start <= out.back().end) {
      out.back().end = std::max(out.back().end, s.end);
    } else {
      out.push_back(s);
    }
  }
  return out;
}

std::vector<Segment> StreamAnnotation::fake_union() const {
  std::vector<Segment> all = audio_fake;
  all.insert(all.end(), visual_fake.begin(), visual_fake.end());
  return merge_union(std::move(all));
}

void StreamAnnotation::validate() const {
  auto check = [&](const std::vector<Segment>& list, const char* modality) {
    for (std::size_t k = 0; k < list.size(); ++k) {
      const auto& s = list[k];
      if (!valid_segment(s, num_frames)) {
        throw std::invalid_argument(
            "clip '" + id + "': " + modality + "_fake[" + std::to_string(k) +
            "] = [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
            ") violates 0 <= start < end <= " + std::to_string(num_frames));
      }
      if (k > 0 && list[k - 1].end > s.start) {
        throw std::invalid_argument(
            "clip '" + id + "': " + modality + "_fake[" + std::to_string(k) +
            "] overlaps or precedes the previous segment");
      }
    }
  };
  check(audio_fake, "audio");
  check(visual_fake, "visual");
}

}  // namespace hbm
