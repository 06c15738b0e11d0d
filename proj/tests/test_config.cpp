#include <doctest.h>

#include "hbm/config.hpp"
#include "hbm/errors.hpp"

using namespace hbm;

namespace {

std::string field_of(const std::string& json) {
  try {
    run_config_from_json(json, "cfg.json");
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

}  // namespace

TEST_CASE("empty config keeps the toy defaults") {
  const auto c = run_config_from_json("{}", "cfg.json");
  CHECK(c.model.frames == 128);
  CHECK(c.model.durations == 40);
  CHECK(c.loss.alpha == 0.1);
  CHECK(c.inference.top_k == 100);
  CHECK(c.seed == 42);
  CHECK(c.synth.shift == 1.5);
}

TEST_CASE("config round-trips through JSON") {
  auto c = tiny_config();
  c.optim.optimizer = OptimizerKind::adam;
  c.seed = 7;
  const auto back = run_config_from_json(c.to_json(), "mem");
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("errors name the offending field") {
  CHECK(field_of(R"({"model": {"T": 130}})") == "model.T");
  CHECK(field_of(R"({"model": {"N": 1}})") == "model.N");
  CHECK(field_of(R"({"model": {"C": -3}})") == "model.C");
  CHECK(field_of(R"({"model": {"bogus": 1}})") == "model.bogus");
  CHECK(field_of(R"({"loss": {"beta0": 1.5}})") == "loss.beta0");
  CHECK(field_of(R"({"loss": {"theta": 0}})") == "loss.theta");
  CHECK(field_of(R"({"loss": {"m": "wide"}})") == "loss.m");
  CHECK(field_of(R"({"optim": {"lr": 0}})") == "optim.lr");
  CHECK(field_of(R"({"optim": {"optimizer": "rmsprop"}})") == "optim.optimizer");
  CHECK(field_of(R"({"inference": {"sigma": 0}})") == "inference.sigma");
  CHECK(field_of(R"({"inference": {"d_f": -1}})") == "inference.d_f");
  CHECK(field_of(R"({"synth": {"delta": -1}})") == "synth.delta");
  CHECK(field_of(R"({"synth": {"max_length": 500}})") == "synth.max_length");
  CHECK(field_of(R"({"synth": {"mix": {"both": -1}}})") == "synth.mix");
  CHECK(field_of(R"({"seed": -4})") == "seed");
  CHECK(field_of(R"({"extras": {}})") == "extras");
}

TEST_CASE("malformed JSON is a parse error") {
  CHECK_THROWS_AS(run_config_from_json("{\"model\": ", "cfg.json"), ParseError);
}

TEST_CASE("tiny config is valid") {
  CHECK_NOTHROW(tiny_config().validate());
  CHECK(tiny_config().model.frames == 16);
}
