#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbm/inference.hpp"
#include "hbm/segment.hpp"

namespace hbm {

// Prediction and ground-truth clip sets do not line up.
class ClipMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ClipGroundTruth {
  std::string id;
  std::vector<Segment> segments;  // union-merged fake segments
};

std::vector<ClipGroundTruth> ground_truth_from(
    const std::vector<StreamAnnotation>& annotations);

// Every prediction id must name a ground-truth clip, and ids must be unique
// on both sides. Ground-truth clips without a prediction entry count as
// having no proposals.

// Detection AP with predictions pooled across clips and ranked by score
// (ties: clip id, then start, then end). Each prediction greedily takes the
// unmatched ground truth of highest IoU (ties: earlier segment) if that IoU
// reaches tau. Area under the all-point interpolated PR curve.
double average_precision(const std::vector<ClipPrediction>& preds,
                         const std::vector<ClipGroundTruth>& gts, double tau);

// Recall with each clip truncated to its best `budget` proposals, averaged
// over tau = 0.50, 0.55, ..., 0.95.
double average_recall(const std::vector<ClipPrediction>& preds,
                      const std::vector<ClipGroundTruth>& gts,
                      std::size_t budget);

const std::vector<double>& ap_thresholds();   // {0.5, 0.75, 0.95}
const std::vector<std::size_t>& ar_budgets(); // {50, 20, 10}

struct ClipDiagnostics {
  std::string id;
  std::size_t ground_truth = 0;
  std::size_t proposals = 0;
  std::size_t matched_at_half = 0;  // greedy matches at IoU 0.5, all proposals
  double best_iou = 0.0;            // best IoU of any proposal with any GT
};

struct EvalReport {
  std::map<double, double> ap;
  std::map<std::size_t, double> ar;
  std::vector<ClipDiagnostics> clips;

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

EvalReport evaluate(const std::vector<ClipPrediction>& preds,
                    const std::vector<ClipGroundTruth>& gts);

EvalReport eval_report_from_json(const std::string& text,
                                 const std::string& source);

}  // namespace hbm
