#include <doctest.h>

#include <algorithm>
#include <random>

#include "hbm/labels.hpp"
#include "oracles.hpp"

using namespace hbm;

namespace {

std::vector<double> rev(std::vector<double> v) {
  std::reverse(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("frame labels are the union of both modalities") {
  StreamAnnotation a{"x", 10, {{2, 5}}, {{4, 7}}};
  const std::vector<std::uint8_t> expect{0, 0, 1, 1, 1, 1, 1, 0, 0, 0};
  CHECK(build_frame_labels(a).y == expect);

  StreamAnnotation none{"n", 6, {}, {}};
  for (auto y : build_frame_labels(none).y) CHECK(y == 0);

  StreamAnnotation all{"f", 6, {{0, 6}}, {}};
  for (auto y : build_frame_labels(all).y) CHECK(y == 1);
}

TEST_CASE("boundary map examples") {
  StreamAnnotation none{"n", 12, {}, {}};
  for (double v : build_boundary_map(none, 4).values) CHECK(v == 0.0);

  StreamAnnotation a{"a", 12, {{2, 6}}, {}};
  const auto m = build_boundary_map(a, 6);
  CHECK(m.at(3, 2) == 1.0);  // duration 4 starting at 2
  CHECK(m.at(3, 0) == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
  // out-of-range cells stay zero
  CHECK(m.at(5, 10) == 0.0);
  CHECK_FALSE(m.in_range(5, 10));
}

TEST_CASE("in-range count is the sum of T - i") {
  StreamAnnotation a{"a", 20, {}, {}};
  const auto m = build_boundary_map(a, 7);
  std::size_t expect = 0;
  for (std::size_t i = 0; i < 7; ++i) expect += 20 - i;
  CHECK(m.in_range_count() == expect);
  std::size_t counted = 0;
  for (double v : m.mask()) counted += v == 1.0;
  CHECK(counted == expect);
}

TEST_CASE("prob triplet examples for segment [3, 7)") {
  StreamAnnotation a{"a", 12, {{3, 7}}, {}};
  const auto p = build_prob_triplet(a, 1.0, Direction::forward);
  CHECK(p.start[3] == 1.0);
  CHECK(p.start[4] == 0.0);
  for (std::size_t t : {4, 5, 6}) CHECK(p.content[t] == 1.0);
  CHECK(p.content[3] == 0.5);
  CHECK(p.end[7] == 1.0);

  StreamAnnotation none{"n", 8, {}, {}};
  for (auto dir : {Direction::forward, Direction::backward}) {
    const auto z = build_prob_triplet(none, 1.0, dir);
    for (std::size_t t = 0; t < 8; ++t) {
      CHECK(z.start[t] == 0.0);
      CHECK(z.end[t] == 0.0);
      CHECK(z.content[t] == 0.0);
    }
  }
}

TEST_CASE("backward triplet is the reversed forward triplet with start and end swapped") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    const auto a = oracle::random_annotation(rng, 8 + static_cast<std::size_t>(k % 25));
    const auto f = build_prob_triplet(a, 1.0, Direction::forward);
    const auto b = build_prob_triplet(a, 1.0, Direction::backward);
    CHECK(b.start == rev(f.end));
    CHECK(b.end == rev(f.start));
    CHECK(b.content == rev(f.content));
    const auto aligned = align_to_other_direction(b);
    CHECK(aligned.start == f.start);
    CHECK(aligned.end == f.end);
    CHECK(aligned.direction == Direction::forward);
  }
}

TEST_CASE("labels match the brute-force oracles") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    const std::size_t T = 4 + static_cast<std::size_t>(k % 29);
    const std::size_t L = 1 + static_cast<std::size_t>(k % 8);
    const auto a = oracle::random_annotation(rng, T);
    CAPTURE(T);
    const auto m = build_boundary_map(a, std::min(L, T));
    CHECK(m.values == oracle::boundary_map(a, std::min(L, T)));
    for (bool mirror : {false, true}) {
      const auto got = build_prob_triplet(a, 1.0, mirror ? Direction::backward : Direction::forward);
      const auto want = oracle::prob_triplet(a, mirror);
      CHECK(got.start == want.start);
      CHECK(got.end == want.end);
      CHECK(got.content == want.content);
    }
  }
}

TEST_CASE("boundary map diagonal is one at every ground-truth segment") {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 50; ++k) {
    const auto a = oracle::random_annotation(rng, 32);
    const std::size_t L = 8;
    const auto m = build_boundary_map(a, L);
    for (const auto& g : a.fake_union()) {
      if (g.length() <= L) CHECK(m.at(g.length() - 1, g.start) == 1.0);
    }
  }
}

TEST_CASE("labels do not depend on segment order") {
  StreamAnnotation a{"a", 30, {{2, 5}, {10, 14}, {20, 25}}, {{12, 18}}};
  StreamAnnotation b = a;
  std::reverse(b.audio_fake.begin(), b.audio_fake.end());
  CHECK(build_boundary_map(a, 6).values == build_boundary_map(b, 6).values);
  const auto pa = build_prob_triplet(a), pb = build_prob_triplet(b);
  CHECK(pa.start == pb.start);
  CHECK(pa.end == pb.end);
  CHECK(pa.content == pb.content);
  CHECK(build_frame_labels(a).y == build_frame_labels(b).y);
}

TEST_CASE("all label values lie in [0, 1]") {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 50; ++k) {
    const auto a = oracle::random_annotation(rng, 24);
    for (double v : build_boundary_map(a, 8).values) CHECK((v >= 0.0 && v <= 1.0));
    const auto p = build_prob_triplet(a);
    for (const auto* s : {&p.start, &p.end, &p.content}) {
      for (double v : *s) CHECK((v >= 0.0 && v <= 1.0));
    }
  }
}
