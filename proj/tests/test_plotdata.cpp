#include <doctest.h>

#include "hbm/errors.hpp"
#include "hbm/plotdata.hpp"

using namespace hbm;

TEST_CASE("loss CSV round-trips through the parser") {
  TrainLog log;
  log.steps = {{1, 0.5, 0.25, 1.0, 1.3}, {2, 0.123456789, 1e-9, 3.5, 3.6}, {5, 0, 0, 0, 0}};
  const auto text = log.loss_csv();
  const auto rows = parse_loss_csv(text, "loss.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].contrastive == 0.123456789);
  CHECK(loss_rows_to_csv(rows) == text);
}

TEST_CASE("tidy loss output has one row per series") {
  const auto tidy = tidy_loss_csv({{3, 1, 2, 3, 4.5}});
  CHECK(tidy == "step,series,value\n3,L_FC,1\n3,L_CP,2\n3,L_FP,3\n3,total,4.5\n");
}

TEST_CASE("malformed loss CSV is rejected with the line number") {
  auto line_of = [](const std::string& text) -> std::string {
    try {
      parse_loss_csv(text, "f.csv");
    } catch (const ParseError& e) {
      return e.what();
    }
    return "<accepted>";
  };
  CHECK(line_of("") .find("f.csv:1") != std::string::npos);
  CHECK(line_of("step,a\n").find("f.csv:1") != std::string::npos);
  const std::string h = "step,L_FC,L_CP,L_FP,total\n";
  CHECK(line_of(h + "1,1,1,1\n").find("f.csv:2") != std::string::npos);
  CHECK(line_of(h + "1,1,1,1,1,1\n").find("f.csv:2") != std::string::npos);
  CHECK(line_of(h + "1,1,1,1,1\n1,1,1,1,1\n").find("f.csv:3") != std::string::npos);
  CHECK(line_of(h + "1,1,x,1,1\n").find("'x'") != std::string::npos);
  CHECK(line_of(h + "1.5,1,1,1,1\n").find("integer") != std::string::npos);
  CHECK(line_of(h + "1,nan,1,1,1\n").find("finite") != std::string::npos);
  CHECK(line_of(h + "1,1,1,1,\n").find("f.csv:2") != std::string::npos);
  CHECK(line_of(h) == "<accepted>");
}

TEST_CASE("eval reports merge into one table") {
  EvalReport a, b;
  for (double t : ap_thresholds()) {
    a.ap[t] = 0.5;
    b.ap[t] = 1.0;
  }
  for (std::size_t n : ar_budgets()) {
    a.ar[n] = 0.25;
    b.ar[n] = 0.0;
  }
  const auto csv = merge_reports_csv({{"bidir", a}, {"fwd", b}});
  CHECK(csv ==
        "run,ap@0.5,ap@0.75,ap@0.95,ar@50,ar@20,ar@10\n"
        "bidir,0.500000,0.500000,0.500000,0.250000,0.250000,0.250000\n"
        "fwd,1.000000,1.000000,1.000000,0.000000,0.000000,0.000000\n");
  CHECK_THROWS_AS(merge_reports_csv({{"a,b", a}}), std::invalid_argument);
}
