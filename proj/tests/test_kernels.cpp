#include <doctest.h>
#include <omp.h>

#include <random>
#include <vector>

#include "hbm/kernels.hpp"

using namespace hbm;
namespace ks = hbm::kernels::serial;
namespace kp = hbm::kernels::parallel;

namespace {

std::vector<double> rand_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Runs `fn` into a fresh zeroed buffer under a given thread count.
template <class F>
std::vector<double> run(std::size_t n, int threads, F fn) {
  std::vector<double> out(n, 0.0);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  fn(std::span<double>(out));
  omp_set_num_threads(saved);
  return out;
}

}  // namespace

// The parallel kernels only split over output rows, so they must agree with
// the serial loops bit for bit, whatever the thread count. Sizes are chosen
// large enough to cross the parallel threshold.
TEST_CASE("parallel kernels equal serial kernels exactly") {
  const std::size_t m = 96, k = 80, n = 72;
  const auto a = rand_vec(m * k, 1), b = rand_vec(k * n, 2);
  const auto bt = rand_vec(n * k, 3), c2 = rand_vec(m * n, 4);
  for (int threads : {1, 2, 4}) {
    CAPTURE(threads);
    CHECK(run(m * n, threads, [&](auto o) { kp::matmul(a, b, o, m, k, n); }) ==
          run(m * n, 1, [&](auto o) { ks::matmul(a, b, o, m, k, n); }));
    CHECK(run(m * k, threads, [&](auto o) { kp::matmul_nt(c2, bt, o, m, n, k); }) ==
          run(m * k, 1, [&](auto o) { ks::matmul_nt(c2, bt, o, m, n, k); }));
    CHECK(run(k * n, threads, [&](auto o) { kp::matmul_tn(a, c2, o, m, k, n); }) ==
          run(k * n, 1, [&](auto o) { ks::matmul_tn(a, c2, o, m, k, n); }));

    const kernels::Conv1dDims d1{128, 24, 20, 3};
    const auto x1 = rand_vec(128 * 24, 5), w1 = rand_vec(3 * 24 * 20, 6),
               dy1 = rand_vec(128 * 20, 7);
    CHECK(run(128 * 20, threads, [&](auto o) { kp::conv1d_forward(x1, w1, o, d1); }) ==
          run(128 * 20, 1, [&](auto o) { ks::conv1d_forward(x1, w1, o, d1); }));
    CHECK(run(128 * 24, threads, [&](auto o) { kp::conv1d_backward_input(dy1, w1, o, d1); }) ==
          run(128 * 24, 1, [&](auto o) { ks::conv1d_backward_input(dy1, w1, o, d1); }));
    CHECK(run(w1.size(), threads, [&](auto o) { kp::conv1d_backward_weight(dy1, x1, o, d1); }) ==
          run(w1.size(), 1, [&](auto o) { ks::conv1d_backward_weight(dy1, x1, o, d1); }));

    const kernels::Conv2dDims d2{20, 64, 9, 6, 3, 3};
    const auto x2 = rand_vec(20 * 64 * 9, 8), w2 = rand_vec(9 * 9 * 6, 9),
               dy2 = rand_vec(20 * 64 * 6, 10);
    CHECK(run(20 * 64 * 6, threads, [&](auto o) { kp::conv2d_forward(x2, w2, o, d2); }) ==
          run(20 * 64 * 6, 1, [&](auto o) { ks::conv2d_forward(x2, w2, o, d2); }));
    CHECK(run(x2.size(), threads, [&](auto o) { kp::conv2d_backward_input(dy2, w2, o, d2); }) ==
          run(x2.size(), 1, [&](auto o) { ks::conv2d_backward_input(dy2, w2, o, d2); }));
    CHECK(run(w2.size(), threads, [&](auto o) { kp::conv2d_backward_weight(dy2, x2, o, d2); }) ==
          run(w2.size(), 1, [&](auto o) { ks::conv2d_backward_weight(dy2, x2, o, d2); }));

    const BMSamplingMask mask(12, 64, 8);
    const std::size_t C = 10;
    const auto f = rand_vec(64 * C, 11), sw = rand_vec(8, 12),
               dout = rand_vec(12 * 64 * C, 13);
    CHECK(run(12 * 64 * C, threads, [&](auto o) { kp::bm_collapse_forward(f, mask, sw, o, C); }) ==
          run(12 * 64 * C, 1, [&](auto o) { ks::bm_collapse_forward(f, mask, sw, o, C); }));
    CHECK(run(64 * C, threads, [&](auto o) { kp::bm_collapse_backward_features(dout, mask, sw, o, C); }) ==
          run(64 * C, 1, [&](auto o) { ks::bm_collapse_backward_features(dout, mask, sw, o, C); }));
    CHECK(run(8, threads, [&](auto o) { kp::bm_collapse_backward_weights(dout, mask, f, o, C); }) ==
          run(8, 1, [&](auto o) { ks::bm_collapse_backward_weights(dout, mask, f, o, C); }));
  }
}

TEST_CASE("kernels accumulate into their output") {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 0, 0, 1};
  std::vector<double> c{10, 10, 10, 10};
  ks::matmul(a, b, c, 2, 2, 2);
  CHECK(c == std::vector<double>{11, 12, 13, 14});
}
