#pragma once

#include <string>
#include <vector>

#include "hbm/eval.hpp"
#include "hbm/pipeline.hpp"

namespace hbm {

// Parses the per-step loss CSV written by training (step,L_FC,L_CP,L_FP,total).
// Throws ParseError naming the line on a bad header, a short or long row, a
// non-numeric field or a non-increasing step.
std::vector<LossRow> parse_loss_csv(const std::string& text,
                                    const std::string& source);
std::string loss_rows_to_csv(const std::vector<LossRow>& rows);

// Long format for plotting: step,series,value with one row per loss term.
std::string tidy_loss_csv(const std::vector<LossRow>& rows);

struct NamedReport {
  std::string run;
  EvalReport report;
};

// One row per report: run,ap@0.5,...,ar@10.
std::string merge_reports_csv(const std::vector<NamedReport>& reports);

}  // namespace hbm
