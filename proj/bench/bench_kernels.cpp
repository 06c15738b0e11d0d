#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "hbm/bm_mask.hpp"
#include "hbm/kernels.hpp"
#include "hbm/pipeline.hpp"

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

// Shapes of the default model: T=128, C=32 (+1 probability channel), L=40,
// N=16, CPG hidden 8.
constexpr std::size_t T = 128, C = 33, L = 40, N = 16, H = 8;

// range(0): 0 = serial reference, otherwise the OpenMP kernel on that many threads
template <class Serial, class Parallel>
void run(benchmark::State& state, std::size_t out_size, Serial serial, Parallel parallel) {
  std::vector<double> out(out_size);
  const auto threads = static_cast<int>(state.range(0));
  if (threads > 0) omp_set_num_threads(threads);
  for (auto _ : state) {
    std::fill(out.begin(), out.end(), 0.0);
    if (threads == 0) {
      serial(std::span<double>(out));
    } else {
      parallel(std::span<double>(out));
    }
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_Conv2dForward(benchmark::State& state) {
  const kernels::Conv2dDims d{L, T, C, H, 3, 3};
  const auto x = rand_vec(L * T * C, 1), w = rand_vec(9 * C * H, 2);
  run(state, L * T * H, [&](auto o) { ks::conv2d_forward(x, w, o, d); },
      [&](auto o) { kp::conv2d_forward(x, w, o, d); });
}

void BM_Conv2dBackwardInput(benchmark::State& state) {
  const kernels::Conv2dDims d{L, T, C, H, 3, 3};
  const auto dy = rand_vec(L * T * H, 3), w = rand_vec(9 * C * H, 4);
  run(state, L * T * C, [&](auto o) { ks::conv2d_backward_input(dy, w, o, d); },
      [&](auto o) { kp::conv2d_backward_input(dy, w, o, d); });
}

void BM_Conv2dBackwardWeight(benchmark::State& state) {
  const kernels::Conv2dDims d{L, T, C, H, 3, 3};
  const auto dy = rand_vec(L * T * H, 5), x = rand_vec(L * T * C, 6);
  run(state, 9 * C * H, [&](auto o) { ks::conv2d_backward_weight(dy, x, o, d); },
      [&](auto o) { kp::conv2d_backward_weight(dy, x, o, d); });
}

void BM_BMCollapseForward(benchmark::State& state) {
  const auto mask = build_sampling_mask(L, T, N);
  const auto f = rand_vec(T * C, 7), sw = rand_vec(N, 8);
  run(state, L * T * C, [&](auto o) { ks::bm_collapse_forward(f, mask, sw, o, C); },
      [&](auto o) { kp::bm_collapse_forward(f, mask, sw, o, C); });
}

void BM_BMCollapseBackwardFeatures(benchmark::State& state) {
  const auto mask = build_sampling_mask(L, T, N);
  const auto g = rand_vec(L * T * C, 9), sw = rand_vec(N, 10);
  run(state, T * C, [&](auto o) { ks::bm_collapse_backward_features(g, mask, sw, o, C); },
      [&](auto o) { kp::bm_collapse_backward_features(g, mask, sw, o, C); });
}

void BM_Matmul(benchmark::State& state) {
  const auto a = rand_vec(T * 64, 11), b = rand_vec(64 * 32, 12);
  run(state, T * 32, [&](auto o) { ks::matmul(a, b, o, T, 64, 32); },
      [&](auto o) { kp::matmul(a, b, o, T, 64, 32); });
}

// One training step's worth of work for a single default-size clip.
void BM_ClipForwardBackward(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  RunConfig cfg;
  cfg.synth.count = 1;
  const auto clip = generate_dataset(cfg.synth, 1).front();
  Model model(cfg.model, 1);
  const auto targets = build_targets(clip.annotation, cfg.model.durations, 1.0);
  for (auto _ : state) {
    backward(total_loss(clip_losses(model, clip.features, targets, cfg.loss), cfg.loss));
    model.zero_grad();
  }
}

void thread_args(benchmark::internal::Benchmark* b) {
  b->Arg(0);
  for (int t = 1; t <= omp_get_num_procs(); t *= 2) b->Arg(t);
  b->ArgName("threads")->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_Conv2dForward)->Apply(thread_args);
BENCHMARK(BM_Conv2dBackwardInput)->Apply(thread_args);
BENCHMARK(BM_Conv2dBackwardWeight)->Apply(thread_args);
BENCHMARK(BM_BMCollapseForward)->Apply(thread_args);
BENCHMARK(BM_BMCollapseBackwardFeatures)->Apply(thread_args);
BENCHMARK(BM_Matmul)->Apply(thread_args);
BENCHMARK(BM_ClipForwardBackward)->Arg(1)->ArgName("threads")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
