#pragma once

// Brute-force reference computations used by the unit and acceptance tests.
// They are written against the definitions directly and share no code with
// the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hbm/eval.hpp"
#include "hbm/inference.hpp"
#include "hbm/labels.hpp"
#include "hbm/segment.hpp"

namespace oracle {

using hbm::Segment;

// Frame-set IoU by enumeration.
inline double frame_iou(const Segment& a, const Segment& b) {
  std::set<std::size_t> sa, sb, uni;
  for (auto t = a.start; t < a.end; ++t) sa.insert(t);
  for (auto t = b.start; t < b.end; ++t) sb.insert(t);
  std::size_t inter = 0;
  for (auto t : sa) inter += sb.count(t);
  uni = sa;
  uni.insert(sb.begin(), sb.end());
  return uni.empty() ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni.size());
}

// Fake frames of either modality, then maximal runs of them.
inline std::vector<Segment> union_segments(const hbm::StreamAnnotation& ann) {
  std::vector<bool> fake(ann.num_frames, false);
  for (const auto* list : {&ann.audio_fake, &ann.visual_fake}) {
    for (const auto& s : *list) {
      for (auto t = s.start; t < s.end; ++t) fake[t] = true;
    }
  }
  std::vector<Segment> out;
  for (std::size_t t = 0; t < ann.num_frames; ++t) {
    if (fake[t] && (t == 0 || !fake[t - 1])) out.push_back({t, t + 1});
    if (fake[t] && t > 0 && fake[t - 1]) out.back().end = t + 1;
  }
  return out;
}

inline std::vector<double> boundary_map(const hbm::StreamAnnotation& ann,
                                        std::size_t L) {
  const std::size_t T = ann.num_frames;
  const auto gts = union_segments(ann);
  std::vector<double> m(L * T, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < T; ++j) {
      if (j + i + 1 > T) continue;
      double best = 0.0;
      for (const auto& g : gts) best = std::max(best, frame_iou({j, j + i + 1}, g));
      m[i * T + j] = best;
    }
  }
  return m;
}

// Interval arithmetic on the half-frame grid (d_f = 1): every endpoint is a
// multiple of 1/2, so doubling makes them integers and overlap lengths become
// exact counts of half-frame cells.
struct HalfInterval {
  long lo2, hi2;  // 2 * endpoints
};

inline long overlap_cells(const HalfInterval& a, const HalfInterval& b) {
  long n = 0;
  for (long c = a.lo2; c < a.hi2; ++c) {
    if (c >= b.lo2 && c < b.hi2) ++n;
  }
  return n;
}

// IoA triplet with d_f = 1. `mirror` reflects every region through
// x -> (T - 1) - x before measuring.
inline hbm::ProbTriplet prob_triplet(const hbm::StreamAnnotation& ann, bool mirror) {
  const long T = static_cast<long>(ann.num_frames);
  auto reflect2 = [&](long x2) { return mirror ? 2 * (T - 1) - x2 : x2; };
  auto region = [&](long a2, long b2) {
    long p = reflect2(a2), q = reflect2(b2);
    return HalfInterval{std::min(p, q), std::max(p, q)};
  };
  std::vector<HalfInterval> starts, ends, contents;
  for (const auto& g : union_segments(ann)) {
    const long s2 = 2 * static_cast<long>(g.start);
    const long e2 = 2 * static_cast<long>(g.end);
    HalfInterval rs = region(s2 - 1, s2 + 1);
    HalfInterval re = region(e2 - 1, e2 + 1);
    HalfInterval rc = region(s2, e2);
    // A mirrored onset is a backward-time offset.
    (mirror ? ends : starts).push_back(rs);
    (mirror ? starts : ends).push_back(re);
    contents.push_back(rc);
  }
  hbm::ProbTriplet p;
  p.direction = mirror ? hbm::Direction::backward : hbm::Direction::forward;
  for (long t = 0; t < T; ++t) {
    HalfInterval anchor{2 * t - 1, 2 * t + 1};
    auto best = [&](const std::vector<HalfInterval>& regions) {
      long cells = 0;
      for (const auto& r : regions) cells = std::max(cells, overlap_cells(anchor, r));
      return static_cast<double>(cells) / 2.0;
    };
    p.start.push_back(best(starts));
    p.end.push_back(best(ends));
    p.content.push_back(best(contents));
  }
  return p;
}

inline std::vector<hbm::ScoredProposal> score(const hbm::BoundaryMap& m,
                                              const hbm::ProbTriplet& f) {
  std::vector<hbm::ScoredProposal> out;
  const std::size_t T = m.frames;
  for (std::size_t i = 0; i < m.durations; ++i) {
    for (std::size_t j = 0; j < T; ++j) {
      if (j + i + 1 > T) continue;
      double c = 0.0;
      for (std::size_t t = j; t <= j + i; ++t) c += f.content[t];
      c /= static_cast<double>(i + 1);
      const std::size_t e = std::min(j + i + 1, T - 1);
      out.push_back({{j, j + i + 1}, m.values[i * T + j] * f.start[j] * f.end[e] * c});
    }
  }
  return out;
}

// Step-by-step Gaussian Soft-NMS simulation.
inline std::vector<hbm::ScoredProposal> soft_nms(std::vector<hbm::ScoredProposal> rest,
                                                 double sigma, double floor,
                                                 std::size_t top_k) {
  std::vector<hbm::ScoredProposal> keep;
  auto better = [](const hbm::ScoredProposal& a, const hbm::ScoredProposal& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.segment < b.segment;
  };
  std::vector<hbm::ScoredProposal> live;
  for (auto& p : rest) {
    if (p.score >= floor) live.push_back(p);
  }
  while (!live.empty() && keep.size() < top_k) {
    std::size_t b = 0;
    for (std::size_t k = 1; k < live.size(); ++k) {
      if (better(live[k], live[b])) b = k;
    }
    const auto top = live[b];
    keep.push_back(top);
    live.erase(live.begin() + static_cast<long>(b));
    std::vector<hbm::ScoredProposal> next;
    for (auto p : live) {
      const double o = frame_iou(top.segment, p.segment);
      p.score = p.score * std::exp(-o * o / sigma);
      if (p.score >= floor) next.push_back(p);
    }
    live = next;
  }
  std::sort(keep.begin(), keep.end(), better);
  return keep;
}

// True positives at tau for proposals of one clip, in rank order.
inline std::vector<bool> greedy(const std::vector<hbm::ScoredProposal>& ranked,
                                const std::vector<Segment>& gts, double tau) {
  std::vector<bool> used(gts.size(), false), tp;
  for (const auto& p : ranked) {
    int pick = -1;
    double best = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = frame_iou(p.segment, gts[g]);
      if (!used[g] && o >= tau && (pick < 0 || o > best)) {
        pick = static_cast<int>(g);
        best = o;
      }
    }
    if (pick >= 0) used[static_cast<std::size_t>(pick)] = true;
    tp.push_back(pick >= 0);
  }
  return tp;
}

inline std::vector<hbm::ScoredProposal> ranked(std::vector<hbm::ScoredProposal> v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.segment < b.segment;
  });
  return v;
}

// AP as the sum over recall steps of the best precision at any rank with at
// least that recall.
inline double average_precision(const std::vector<hbm::ClipPrediction>& preds,
                                 const std::vector<hbm::ClipGroundTruth>& gts,
                                 double tau) {
  std::map<std::string, std::vector<Segment>> gt;
  std::size_t total = 0;
  for (const auto& g : gts) {
    gt[g.id] = g.segments;
    total += g.segments.size();
  }
  struct Row {
    double score;
    std::string clip;
    Segment seg;
    bool tp;
  };
  std::vector<Row> rows;
  for (const auto& p : preds) {
    const auto r = ranked(p.proposals);
    const auto tp = greedy(r, gt[p.id], tau);
    for (std::size_t k = 0; k < r.size(); ++k) rows.push_back({r[k].score, p.id, r[k].segment, tp[k]});
  }
  if (total == 0) return 0.0;
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.clip != b.clip) return a.clip < b.clip;
    return a.seg < b.seg;
  });
  std::vector<double> prec, rec;
  double hits = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    hits += rows[k].tp ? 1.0 : 0.0;
    prec.push_back(hits / static_cast<double>(k + 1));
    rec.push_back(hits / static_cast<double>(total));
  }
  double ap = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!rows[k].tp) continue;
    double best = 0.0;
    for (std::size_t q = k; q < rows.size(); ++q) best = std::max(best, prec[q]);
    ap += best / static_cast<double>(total);
  }
  return ap;
}

inline double average_recall(const std::vector<hbm::ClipPrediction>& preds,
                             const std::vector<hbm::ClipGroundTruth>& gts,
                             std::size_t budget) {
  std::map<std::string, std::vector<hbm::ScoredProposal>> by_clip;
  for (const auto& p : preds) by_clip[p.id] = p.proposals;
  double sum = 0.0;
  for (int k = 0; k < 10; ++k) {
    const double tau = (50 + 5 * k) / 100.0;  // 0.5 + 0.05 * k overshoots 0.85
    double hit = 0, total = 0;
    for (const auto& g : gts) {
      auto r = ranked(by_clip[g.id]);
      if (r.size() > budget) r.resize(budget);
      for (bool b : greedy(r, g.segments, tau)) hit += b;
      total += static_cast<double>(g.segments.size());
    }
    sum += total > 0 ? hit / total : 0.0;
  }
  return sum / 10.0;
}

inline hbm::StreamAnnotation random_annotation(std::mt19937_64& rng, std::size_t T,
                                               const std::string& id = "clip") {
  hbm::StreamAnnotation ann;
  ann.id = id;
  ann.num_frames = T;
  std::uniform_int_distribution<int> count(0, 3);
  for (auto* list : {&ann.audio_fake, &ann.visual_fake}) {
    // Disjoint sorted segments within one modality.
    std::size_t cursor = 0;
    const int n = count(rng);
    for (int k = 0; k < n && cursor + 1 < T; ++k) {
      std::uniform_int_distribution<std::size_t> gap(0, std::min<std::size_t>(6, T - cursor - 1));
      const std::size_t s = cursor + gap(rng);
      if (s >= T) break;
      std::uniform_int_distribution<std::size_t> len(1, std::min<std::size_t>(10, T - s));
      const std::size_t e = s + len(rng);
      list->push_back({s, e});
      cursor = e + 1;
      if (cursor >= T) break;
    }
  }
  return ann;
}

}  // namespace oracle
