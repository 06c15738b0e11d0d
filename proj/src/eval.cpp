#include "hbm/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <unordered_map>

#include "hbm/errors.hpp"

namespace hbm {

using nlohmann::json;

namespace {

// Pairs each ground-truth clip with its (possibly empty) proposal list,
// sorted best first.
struct Paired {
  const ClipGroundTruth* gt;
  std::vector<ScoredProposal> proposals;
};

bool proposal_before(const ScoredProposal& a, const ScoredProposal& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  return a.segment.end < b.segment.end;
}

std::vector<Paired> pair_up(const std::vector<ClipPrediction>& preds,
                            const std::vector<ClipGroundTruth>& gts) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < gts.size(); ++k) {
    if (!index.emplace(gts[k].id, k).second) {
      throw ClipMismatchError("duplicate ground-truth clip id '" + gts[k].id + "'");
    }
  }
  std::vector<Paired> out(gts.size());
  std::vector<bool> seen(gts.size(), false);
  for (std::size_t k = 0; k < gts.size(); ++k) out[k].gt = &gts[k];
  for (const auto& p : preds) {
    auto it = index.find(p.id);
    if (it == index.end()) {
      throw ClipMismatchError("prediction for unknown clip '" + p.id + "'");
    }
    if (seen[it->second]) {
      throw ClipMismatchError("duplicate prediction clip id '" + p.id + "'");
    }
    seen[it->second] = true;
    out[it->second].proposals = p.proposals;
  }
  for (auto& c : out) {
    std::sort(c.proposals.begin(), c.proposals.end(), proposal_before);
  }
  // Clip-id order makes the pooled ranking independent of input order.
  std::sort(out.begin(), out.end(),
            [](const Paired& a, const Paired& b) { return a.gt->id < b.gt->id; });
  return out;
}

// Greedy matching of proposals (already in rank order) to ground truth.
// Returns one flag per proposal.
std::vector<bool> match(const std::vector<ScoredProposal>& proposals,
                        std::size_t count, const std::vector<Segment>& gt,
                        double tau) {
  std::vector<bool> tp(count, false);
  std::vector<bool> taken(gt.size(), false);
  for (std::size_t p = 0; p < count; ++p) {
    double best = -1.0;
    std::size_t best_g = gt.size();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      const double o = iou(proposals[p].segment, gt[g]);
      if (o >= tau && o > best) {
        best = o;
        best_g = g;
      }
    }
    if (best_g < gt.size()) {
      taken[best_g] = true;
      tp[p] = true;
    }
  }
  return tp;
}

struct Ranked {
  double score;
  std::size_t clip;  // index into the id-sorted clip list
  Segment segment;
  bool tp;
};

double precision_recall_area(const std::vector<Paired>& clips, double tau) {
  std::size_t total_gt = 0;
  for (const auto& c : clips) total_gt += c.gt->segments.size();
  if (total_gt == 0) return 0.0;

  std::vector<std::vector<bool>> flags(clips.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < clips.size(); ++k) {
    flags[k] = match(clips[k].proposals, clips[k].proposals.size(),
                     clips[k].gt->segments, tau);
  }

  std::vector<Ranked> pool;
  for (std::size_t k = 0; k < clips.size(); ++k) {
    for (std::size_t p = 0; p < clips[k].proposals.size(); ++p) {
      const auto& sp = clips[k].proposals[p];
      pool.push_back({sp.score, k, sp.segment, flags[k][p]});
    }
  }
  std::sort(pool.begin(), pool.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.clip != b.clip) return a.clip < b.clip;
    return a.segment < b.segment;
  });

  std::vector<double> precision(pool.size()), recall(pool.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < pool.size(); ++r) {
    if (pool[r].tp) ++hits;
    precision[r] = static_cast<double>(hits) / static_cast<double>(r + 1);
    recall[r] = static_cast<double>(hits) / static_cast<double>(total_gt);
  }
  for (std::size_t r = pool.size(); r-- > 1;) {
    precision[r - 1] = std::max(precision[r - 1], precision[r]);
  }
  double area = 0.0, prev_recall = 0.0;
  for (std::size_t r = 0; r < pool.size(); ++r) {
    area += (recall[r] - prev_recall) * precision[r];
    prev_recall = recall[r];
  }
  return area;
}

double recall_at(const std::vector<Paired>& clips, std::size_t budget, double tau) {
  std::size_t total_gt = 0, hits = 0;
  for (const auto& c : clips) {
    total_gt += c.gt->segments.size();
    const std::size_t n = std::min(budget, c.proposals.size());
    const auto tp = match(c.proposals, n, c.gt->segments, tau);
    hits += static_cast<std::size_t>(std::count(tp.begin(), tp.end(), true));
  }
  return total_gt == 0 ? 0.0
                       : static_cast<double>(hits) / static_cast<double>(total_gt);
}

double mean_recall(const std::vector<Paired>& clips, std::size_t budget) {
  double total = 0.0;
  for (int k = 0; k < 10; ++k) total += recall_at(clips, budget, (50 + 5 * k) / 100.0);
  return total / 10.0;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string threshold_key(double tau) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%g", tau);
  return buf;
}

}  // namespace

std::vector<ClipGroundTruth> ground_truth_from(
    const std::vector<StreamAnnotation>& annotations) {
  std::vector<ClipGroundTruth> out;
  out.reserve(annotations.size());
  for (const auto& a : annotations) out.push_back({a.id, a.fake_union()});
  return out;
}

double average_precision(const std::vector<ClipPrediction>& preds,
                         const std::vector<ClipGroundTruth>& gts, double tau) {
  return precision_recall_area(pair_up(preds, gts), tau);
}

double average_recall(const std::vector<ClipPrediction>& preds,
                      const std::vector<ClipGroundTruth>& gts,
                      std::size_t budget) {
  return mean_recall(pair_up(preds, gts), budget);
}

const std::vector<double>& ap_thresholds() {
  static const std::vector<double> v{0.5, 0.75, 0.95};
  return v;
}

const std::vector<std::size_t>& ar_budgets() {
  static const std::vector<std::size_t> v{50, 20, 10};
  return v;
}

EvalReport evaluate(const std::vector<ClipPrediction>& preds,
                    const std::vector<ClipGroundTruth>& gts) {
  const auto clips = pair_up(preds, gts);
  EvalReport report;
  for (double tau : ap_thresholds()) report.ap[tau] = precision_recall_area(clips, tau);
  for (std::size_t b : ar_budgets()) report.ar[b] = mean_recall(clips, b);
  for (const auto& c : clips) {
    ClipDiagnostics d;
    d.id = c.gt->id;
    d.ground_truth = c.gt->segments.size();
    d.proposals = c.proposals.size();
    const auto tp = match(c.proposals, c.proposals.size(), c.gt->segments, 0.5);
    d.matched_at_half = static_cast<std::size_t>(std::count(tp.begin(), tp.end(), true));
    for (const auto& p : c.proposals) {
      for (const auto& g : c.gt->segments) d.best_iou = std::max(d.best_iou, iou(p.segment, g));
    }
    report.clips.push_back(std::move(d));
  }
  return report;
}

std::string EvalReport::to_json() const {
  json ap_obj = json::object(), ar_obj = json::object(), clip_arr = json::array();
  for (const auto& [tau, v] : ap) ap_obj[threshold_key(tau)] = v;
  for (const auto& [n, v] : ar) ar_obj[std::to_string(n)] = v;
  for (const auto& c : clips) {
    clip_arr.push_back({{"id", c.id},
                        {"ground_truth", c.ground_truth},
                        {"proposals", c.proposals},
                        {"matched_at_0.5", c.matched_at_half},
                        {"best_iou", c.best_iou}});
  }
  json doc{{"ap", ap_obj}, {"ar", ar_obj}, {"clips", clip_arr}};
  return doc.dump(1) + "\n";
}

std::string EvalReport::csv_header() {
  std::string h;
  for (double tau : ap_thresholds()) h += "ap@" + threshold_key(tau) + ",";
  for (std::size_t b : ar_budgets()) h += "ar@" + std::to_string(b) + ",";
  h.pop_back();
  return h;
}

std::string EvalReport::csv_row() const {
  std::string row;
  for (double tau : ap_thresholds()) {
    auto it = ap.find(tau);
    row += (it == ap.end() ? std::string() : format_number(it->second)) + ",";
  }
  for (std::size_t b : ar_budgets()) {
    auto it = ar.find(b);
    row += (it == ar.end() ? std::string() : format_number(it->second)) + ",";
  }
  row.pop_back();
  return row;
}

EvalReport eval_report_from_json(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what(), e.byte);
  }
  if (!doc.is_object() || !doc.contains("ap") || !doc["ap"].is_object() ||
      !doc.contains("ar") || !doc["ar"].is_object()) {
    throw ParseError(source + ": expected an eval report with \"ap\" and \"ar\" objects");
  }
  EvalReport r;
  try {
    for (double tau : ap_thresholds()) {
      const auto key = threshold_key(tau);
      if (doc["ap"].contains(key)) r.ap[tau] = doc["ap"][key].get<double>();
    }
    for (std::size_t b : ar_budgets()) {
      const auto key = std::to_string(b);
      if (doc["ar"].contains(key)) r.ar[b] = doc["ar"][key].get<double>();
    }
  } catch (const json::exception& e) {
    throw ParseError(source + ": " + e.what());
  }
  return r;
}

}  // namespace hbm
