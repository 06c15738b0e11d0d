#include <doctest.h>

#include <cmath>
#include <random>

#include "hbm/errors.hpp"
#include "hbm/gradcheck.hpp"
#include "hbm/losses.hpp"
#include "hbm/ops.hpp"

using namespace hbm;

namespace {

Tensor rand_tensor(Shape s, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(s));
  for (auto& x : v) x = u(rng);
  return Tensor::from_data(std::move(s), std::move(v));
}

std::vector<double> rand_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

FrameLabels labels(std::vector<std::uint8_t> y) { return {std::move(y)}; }

ProbTriplet triplet(std::mt19937_64& rng, std::size_t T) {
  return {rand_vec(T, rng), rand_vec(T, rng), rand_vec(T, rng), Direction::forward};
}

}  // namespace

TEST_CASE("contrastive loss examples") {
  LossConfig cfg;
  auto f = Tensor::from_data({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(contrastive_loss(f, f, f, f, labels({0, 0, 0, 0}), cfg).item() == 0.0);
  // one fake frame with zero distance pays the full hinge: (1 - 0)^2 / 4
  CHECK(contrastive_loss(f, f, f, f, labels({0, 1, 0, 0}), cfg).item() == 0.25);
  // every frame fake and at least the margin apart
  auto g = ops::add_scalar(f, 1.0);
  CHECK(contrastive_loss(f, g, f, g, labels({1, 1, 1, 1}), cfg).item() == 0.0);
}

TEST_CASE("contrastive loss reads the backward pair at the mirrored frame") {
  LossConfig cfg;
  auto z = Tensor::zeros({3, 1});
  auto bwd_va = Tensor::from_data({3, 1}, {0.5, 0, 0});  // backward frame 0 = forward frame 2
  // only forward frame 2 (real) gets d = 0.5
  CHECK(contrastive_loss(z, z, z, bwd_va, labels({0, 0, 0}), cfg).item() ==
        doctest::Approx(0.25 / 3).epsilon(1e-15));
}

TEST_CASE("cpg loss examples") {
  StreamAnnotation a{"a", 8, {{2, 5}}, {}};
  const auto truth = build_boundary_map(a, 3);
  auto same = Tensor::from_data({3, 8}, truth.values);
  CHECK(cpg_loss(same, truth).item() == 0.0);
  auto shifted = truth.values;
  for (auto& v : shifted) v += 0.1;
  CHECK(cpg_loss(Tensor::from_data({3, 8}, shifted), truth).item() ==
        doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS_AS(cpg_loss(Tensor::zeros({2, 8}), truth), ShapeError);
}

TEST_CASE("cpg loss equals a direct two-loop computation") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    StreamAnnotation a{"a", 12, {{1, 4}}, {{6, 10}}};
    const auto truth = build_boundary_map(a, 5);
    auto pred = rand_tensor({5, 12}, rng, 0, 1);
    double s = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 12; ++j) {
        if (j + i + 1 > 12) continue;
        const double d = pred.data()[i * 12 + j] - truth.at(i, j);
        s += d * d;
        ++n;
      }
    }
    CHECK(cpg_loss(pred, truth).item() == doctest::Approx(s / n).epsilon(1e-13));
  }
}

TEST_CASE("focal loss examples") {
  LossConfig cfg;
  const double v = focal_loss(Tensor::from_data({1}, {0.5}), {1.0}, cfg).item();
  CHECK(v == doctest::Approx(0.75 * 0.25 * std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(v - 0.12993) < 1e-4);  // published figure is rounded loosely

  // beta1 = 0, beta0 = 0.5 gives half the mean BCE
  LossConfig plain = cfg;
  plain.beta0 = 0.5;
  plain.beta1 = 0.0;
  const double got = focal_loss(Tensor::from_data({2}, {0.8, 0.3}), {1.0, 0.0}, plain).item();
  CHECK(got == doctest::Approx(0.5 * (-std::log(0.8) - std::log(0.7)) / 2).epsilon(1e-12));

  // confident correct predictions cost almost nothing
  CHECK(focal_loss(Tensor::from_data({2}, {1 - 1e-9, 1e-9}), {1.0, 0.0}, cfg).item() < 1e-15);
  CHECK_THROWS_AS(focal_loss(Tensor::from_data({1}, {1.5}), {1.0}, cfg), std::domain_error);
}

TEST_CASE("focal loss decreases as the prediction improves") {
  LossConfig cfg;
  double prev = 1e300;
  for (double p = 0.05; p < 1.0; p += 0.05) {
    const double v = focal_loss(Tensor::from_data({1}, {p}), {0.9}, cfg).item();
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("fpg loss is the sum of six focal terms") {
  std::mt19937_64 rng(5);
  LossConfig cfg;
  const std::size_t T = 10;
  auto pf = rand_tensor({T, 3}, rng, 0.01, 0.99), pb = rand_tensor({T, 3}, rng, 0.01, 0.99);
  const auto tf = triplet(rng, T), tb = triplet(rng, T);
  double expect = 0;
  for (const auto& [pred, truth] : {std::pair{pf, tf}, {pb, tb}}) {
    const std::vector<double>* ch[3] = {&truth.start, &truth.end, &truth.content};
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> col(T);
      for (std::size_t t = 0; t < T; ++t) col[t] = pred.data()[t * 3 + c];
      expect += focal_loss(Tensor::from_data({T}, col), *ch[c], cfg).item();
    }
  }
  CHECK(fpg_loss(pf, pb, tf, tb, cfg).item() == doctest::Approx(expect).epsilon(1e-13));

  // all-zero targets with near-zero predictions
  ProbTriplet zero{std::vector<double>(T), std::vector<double>(T), std::vector<double>(T),
                   Direction::forward};
  auto tiny = Tensor::filled({T, 3}, 1e-6);
  CHECK(fpg_loss(tiny, tiny, zero, zero, cfg).item() < 1e-10);
}

TEST_CASE("total loss combines the parts") {
  LossConfig cfg;
  LossComponents parts{Tensor::scalar(2.0), Tensor::scalar(0.5), Tensor::scalar(1.0)};
  CHECK(total_loss(parts, cfg).item() == doctest::Approx(1.7).epsilon(1e-15));
  cfg.alpha = 0.0;
  CHECK(total_loss(parts, cfg).item() == 1.5);
  LossComponents zero{Tensor::scalar(0), Tensor::scalar(0), Tensor::scalar(0)};
  CHECK(total_loss(zero, LossConfig{}).item() == 0.0);
}

TEST_CASE("loss config validation") {
  LossConfig c;
  c.beta0 = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.margin = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.label_threshold = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("loss gradients match finite differences on 20 random instances") {
  LossConfig cfg;
  const std::size_t T = 8, C = 3;
  for (int trial = 0; trial < 20; ++trial) {
    std::mt19937_64 rng(100 + trial);
    std::vector<std::uint8_t> y(T);
    for (auto& v : y) v = rng() % 2;
    const auto fl = labels(y);
    auto av = rand_tensor({T, C}, rng, -1, 1), va = rand_tensor({T, C}, rng, -1, 1),
         ab = rand_tensor({T, C}, rng, -1, 1), vb = rand_tensor({T, C}, rng, -1, 1);
    CHECK(grad_check([&](const Tensor& x) { return contrastive_loss(x, va, ab, vb, fl, cfg); }, av) <= 1e-4);
    CHECK(grad_check([&](const Tensor& x) { return contrastive_loss(av, va, ab, x, fl, cfg); }, vb) <= 1e-4);

    StreamAnnotation a{"a", T, {{1, 4}}, {}};
    const auto truth = build_boundary_map(a, 3);
    CHECK(grad_check([&](const Tensor& x) { return cpg_loss(x, truth); },
                     rand_tensor({3, T}, rng, 0, 1)) <= 1e-4);

    const auto tf = triplet(rng, T), tb = triplet(rng, T);
    auto pf = rand_tensor({T, 3}, rng, 0.05, 0.95), pb = rand_tensor({T, 3}, rng, 0.05, 0.95);
    CHECK(grad_check([&](const Tensor& x) { return fpg_loss(x, pb, tf, tb, cfg); }, pf) <= 1e-4);
    CHECK(grad_check([&](const Tensor& x) { return fpg_loss(pf, x, tf, tb, cfg); }, pb) <= 1e-4);
  }
}
