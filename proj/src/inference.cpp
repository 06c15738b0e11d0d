#include "hbm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "hbm/errors.hpp"

namespace hbm {

using nlohmann::json;

void InferenceConfig::validate() const {
  if (!(sigma > 0) || !std::isfinite(sigma)) {
    throw ConfigError("inference.sigma", "must be finite and > 0");
  }
  if (!(score_floor >= 0) || !std::isfinite(score_floor)) {
    throw ConfigError("inference.score_floor", "must be finite and >= 0");
  }
  if (top_k == 0) throw ConfigError("inference.top_k", "must be >= 1");
  if (!(interval > 0) || !std::isfinite(interval)) {
    throw ConfigError("inference.d_f", "must be finite and > 0");
  }
}

ProbTriplet fuse_bidirectional(const ProbTriplet& fwd, const ProbTriplet& bwd) {
  if (fwd.frames() != bwd.frames() || fwd.end.size() != fwd.frames() ||
      fwd.content.size() != fwd.frames() || bwd.end.size() != bwd.frames() ||
      bwd.content.size() != bwd.frames()) {
    throw std::invalid_argument("fuse_bidirectional: sequence lengths differ (" +
                                std::to_string(fwd.frames()) + " vs " +
                                std::to_string(bwd.frames()) + ")");
  }
  const ProbTriplet aligned = align_to_other_direction(bwd);
  ProbTriplet out;
  out.direction = Direction::forward;
  auto fuse = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> r(a.size());
    for (std::size_t t = 0; t < a.size(); ++t) r[t] = std::sqrt(a[t] * b[t]);
    return r;
  };
  out.start = fuse(fwd.start, aligned.start);
  out.end = fuse(fwd.end, aligned.end);
  out.content = fuse(fwd.content, aligned.content);
  return out;
}

std::vector<ScoredProposal> score_proposals(const BoundaryMap& predicted,
                                            const ProbTriplet& fused) {
  const std::size_t T = predicted.frames;
  if (fused.frames() != T) {
    throw std::invalid_argument("score_proposals: map has " +
                                std::to_string(T) + " frames, sequences " +
                                std::to_string(fused.frames()));
  }
  // prefix[t] = sum of content[0 .. t)
  std::vector<double> prefix(T + 1, 0.0);
  for (std::size_t t = 0; t < T; ++t) prefix[t + 1] = prefix[t] + fused.content[t];

  std::vector<ScoredProposal> out;
  out.reserve(predicted.in_range_count());
  for (std::size_t i = 0; i < predicted.durations; ++i) {
    for (std::size_t j = 0; j + i + 1 <= T; ++j) {
      const std::size_t last = j + i;
      const std::size_t end_idx = std::min(last + 1, T - 1);
      const double content =
          (prefix[last + 1] - prefix[j]) / static_cast<double>(i + 1);
      const double score = predicted.at(i, j) * fused.start[j] *
                           fused.end[end_idx] * content;
      out.push_back({{j, last + 1}, score});
    }
  }
  return out;
}

namespace {

bool ranks_before(const ScoredProposal& a, const ScoredProposal& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  return a.segment.end < b.segment.end;
}

}  // namespace

std::vector<ScoredProposal> soft_nms(std::vector<ScoredProposal> proposals,
                                     double sigma, double score_floor,
                                     std::size_t top_k) {
  if (!(sigma > 0)) throw std::invalid_argument("soft_nms: sigma must be > 0");
  if (top_k == 0) throw std::invalid_argument("soft_nms: top_k must be >= 1");
  std::erase_if(proposals,
                [&](const ScoredProposal& p) { return p.score < score_floor; });

  std::vector<ScoredProposal> kept;
  while (!proposals.empty() && kept.size() < top_k) {
    auto best = std::min_element(proposals.begin(), proposals.end(), ranks_before);
    const ScoredProposal chosen = *best;
    *best = proposals.back();
    proposals.pop_back();
    kept.push_back(chosen);
    for (auto& p : proposals) {
      const double overlap = iou(chosen.segment, p.segment);
      p.score *= std::exp(-(overlap * overlap) / sigma);
    }
    std::erase_if(proposals,
                  [&](const ScoredProposal& p) { return p.score < score_floor; });
  }
  std::stable_sort(kept.begin(), kept.end(), ranks_before);
  return kept;
}

std::string predictions_to_json(const std::vector<ClipPrediction>& preds) {
  json arr = json::array();
  for (const auto& clip : preds) {
    json props = json::array();
    for (const auto& p : clip.proposals) {
      props.push_back({p.segment.start, p.segment.end, p.score});
    }
    arr.push_back({{"id", clip.id}, {"proposals", std::move(props)}});
  }
  return arr.dump(1) + "\n";
}

std::vector<ClipPrediction> predictions_from_json(const std::string& text,
                                                  const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what(), e.byte);
  }
  if (!doc.is_array()) throw ParseError(source + ": expected a JSON array");
  std::vector<ClipPrediction> out;
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const auto& obj = doc[k];
    const std::string where = source + "[" + std::to_string(k) + "]";
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("proposals") || !obj["proposals"].is_array()) {
      throw ParseError(where + ": expected {\"id\": str, \"proposals\": [...]}");
    }
    ClipPrediction clip{obj["id"].get<std::string>(), {}};
    for (const auto& p : obj["proposals"]) {
      if (!p.is_array() || p.size() != 3 || !p[0].is_number_unsigned() ||
          !p[1].is_number_unsigned() || !p[2].is_number()) {
        throw ParseError(where + ": each proposal must be [start, end, score]");
      }
      ScoredProposal sp{{p[0].get<std::size_t>(), p[1].get<std::size_t>()},
                        p[2].get<double>()};
      if (sp.segment.start >= sp.segment.end || !(sp.score >= 0.0 && sp.score <= 1.0)) {
        throw ParseError(where + ": invalid proposal " + p.dump());
      }
      clip.proposals.push_back(sp);
    }
    out.push_back(std::move(clip));
  }
  return out;
}

}  // namespace hbm
