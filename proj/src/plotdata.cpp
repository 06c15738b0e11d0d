#include "hbm/plotdata.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hbm/errors.hpp"

namespace hbm {

namespace {

constexpr const char* kLossHeader = "step,L_FC,L_CP,L_FP,total";

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

double number(const std::string& cell, const std::string& at) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError(at + "expected a finite number, got '" + cell + "'");
  }
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::vector<LossRow> parse_loss_csv(const std::string& text,
                                    const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line != kLossHeader) {
    throw ParseError(where(source, 1) + "expected header '" + kLossHeader + "'");
  }
  ++lineno;
  std::vector<LossRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto at = where(source, lineno);
    const auto cells = split_commas(line);
    if (cells.size() != 5) {
      throw ParseError(at + "expected 5 fields, got " + std::to_string(cells.size()));
    }
    const double step = number(cells[0], at);
    if (step < 0 || step != std::floor(step)) {
      throw ParseError(at + "step must be a non-negative integer");
    }
    LossRow r;
    r.step = static_cast<std::size_t>(step);
    if (!rows.empty() && r.step <= rows.back().step) {
      throw ParseError(at + "steps must increase");
    }
    r.contrastive = number(cells[1], at);
    r.proposal = number(cells[2], at);
    r.frame = number(cells[3], at);
    r.total = number(cells[4], at);
    rows.push_back(r);
  }
  return rows;
}

std::string loss_rows_to_csv(const std::vector<LossRow>& rows) {
  TrainLog log;
  log.steps = rows;
  return log.loss_csv();
}

std::string tidy_loss_csv(const std::vector<LossRow>& rows) {
  std::string out = "step,series,value\n";
  for (const auto& r : rows) {
    const auto s = std::to_string(r.step);
    out += s + ",L_FC," + fmt(r.contrastive) + "\n";
    out += s + ",L_CP," + fmt(r.proposal) + "\n";
    out += s + ",L_FP," + fmt(r.frame) + "\n";
    out += s + ",total," + fmt(r.total) + "\n";
  }
  return out;
}

std::string merge_reports_csv(const std::vector<NamedReport>& reports) {
  std::string out = "run," + EvalReport::csv_header() + "\n";
  for (const auto& r : reports) {
    if (r.run.find_first_of(",\n\"") != std::string::npos) {
      throw std::invalid_argument("run name '" + r.run +
                                  "' contains a comma, quote or newline");
    }
    out += r.run + "," + r.report.csv_row() + "\n";
  }
  return out;
}

}  // namespace hbm
