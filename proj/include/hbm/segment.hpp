#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

namespace hbm {

// Half-open frame interval [start, end).
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end > start ? end - start : 0; }
  auto operator<=>(const Segment&) const = default;
};

bool valid_segment(const Segment& s, std::size_t num_frames);

// |a ∩ b| / |a ∪ b| in frames.
double iou(const Segment& a, const Segment& b);

// Sorted union with overlapping or touching intervals merged.
std::vector<Segment> merge_union(std::vector<Segment> segments);

struct StreamAnnotation {
  std::string id;
  std::size_t num_frames = 0;
  std::vector<Segment> audio_fake;
  std::vector<Segment> visual_fake;

  // A frame is fake when either modality is manipulated there.
  std::vector<Segment> fake_union() const;

  // Throws std::invalid_argument naming the offending segment.
  void validate() const;

  bool operator==(const StreamAnnotation&) const = default;
};

}  // namespace hbm
