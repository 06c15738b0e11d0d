#include "hbm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "hbm/errors.hpp"

namespace hbm {

namespace {

Tensor flip_rows(const Tensor& x) {
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(x.numel());
  const auto& d = x.data();
  for (std::size_t t = 0; t < rows; ++t) {
    std::copy_n(d.begin() + static_cast<long>((rows - 1 - t) * cols), cols,
                out.begin() + static_cast<long>(t * cols));
  }
  return Tensor::from_data(x.shape(), std::move(out));
}

std::mt19937_64 clip_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kDirectionStream = ~std::uint64_t{0};

std::vector<double> unit_vector(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    for (auto& x : v) x = normal(rng);
    norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  } while (norm < 1e-12);
  for (auto& x : v) x /= norm;
  return v;
}

// Smoothed Gaussian noise: AR(1) per dimension with unit stationary variance.
std::vector<double> real_frames(std::size_t frames, std::size_t dim,
                                const SynthConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double rho = cfg.smoothing;
  const double innov = std::sqrt(1.0 - rho * rho);
  std::vector<double> x(frames * dim);
  for (std::size_t d = 0; d < dim; ++d) x[d] = normal(rng);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t d = 0; d < dim; ++d) {
      x[t * dim + d] = rho * x[(t - 1) * dim + d] + innov * normal(rng);
    }
  }
  for (auto& v : x) v *= cfg.noise;
  return x;
}

void inject(std::vector<double>& x, std::size_t dim, const Segment& seg,
            const std::vector<double>& base_dir, const SynthConfig& cfg,
            std::mt19937_64& rng) {
  const auto jitter = unit_vector(dim, rng);
  std::vector<double> dir(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    dir[d] = base_dir[d] + cfg.direction_jitter * jitter[d];
  }
  const double norm =
      std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
  for (std::size_t t = seg.start; t < seg.end; ++t) {
    for (std::size_t d = 0; d < dim; ++d) {
      x[t * dim + d] += cfg.shift * dir[d] / norm;
    }
  }
}

Tensor to_f32_tensor(std::size_t frames, std::size_t dim,
                     std::vector<double> values) {
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
  return Tensor::from_data({frames, dim}, std::move(values));
}

std::vector<std::size_t> draw_lengths(std::size_t k, const SynthConfig& cfg,
                                      std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(cfg.min_length,
                                                 cfg.max_length);
  const std::size_t room = cfg.num_frames - 2 * cfg.edge_margin;
  while (k > 0) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      std::vector<std::size_t> lengths(k);
      for (auto& l : lengths) l = len(rng);
      const std::size_t need =
          std::accumulate(lengths.begin(), lengths.end(), std::size_t{0}) +
          (k - 1) * cfg.edge_margin;
      if (need <= room) return lengths;
    }
    --k;
  }
  return {};
}

Clip make_clip(const SynthConfig& cfg, std::uint64_t seed, std::size_t index,
               const std::vector<double>& audio_dir,
               const std::vector<double>& visual_dir) {
  auto rng = clip_rng(seed, index);
  const std::size_t T = cfg.num_frames;

  std::uniform_int_distribution<std::size_t> count(cfg.min_segments,
                                                   cfg.max_segments);
  const auto lengths = draw_lengths(count(rng), cfg, rng);
  const std::size_t k = lengths.size();

  // Spread the free frames over k + 1 gaps with random cut points.
  std::size_t used =
      std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
  if (k > 0) used += (k - 1) * cfg.edge_margin;
  const std::size_t free = T - 2 * cfg.edge_margin - used;
  std::uniform_int_distribution<std::size_t> cut(0, free);
  std::vector<std::size_t> cuts(k);
  for (auto& c : cuts) c = cut(rng);
  std::sort(cuts.begin(), cuts.end());

  std::discrete_distribution<int> kind(
      {cfg.mix.audio_only, cfg.mix.visual_only, cfg.mix.both});

  Clip clip;
  char id[32];
  std::snprintf(id, sizeof id, "clip_%05zu", index);
  clip.annotation.id = id;
  clip.annotation.num_frames = T;

  std::vector<Segment> segments;
  std::vector<int> kinds;
  std::size_t cursor = cfg.edge_margin;
  std::size_t prev_cut = 0;
  for (std::size_t s = 0; s < k; ++s) {
    cursor += cuts[s] - prev_cut;
    prev_cut = cuts[s];
    segments.push_back({cursor, cursor + lengths[s]});
    cursor += lengths[s] + cfg.edge_margin;
    kinds.push_back(kind(rng));
  }

  auto audio = real_frames(T, cfg.audio_dim, cfg, rng);
  auto visual = real_frames(T, cfg.visual_dim, cfg, rng);
  for (std::size_t s = 0; s < k; ++s) {
    if (kinds[s] != 1) {
      clip.annotation.audio_fake.push_back(segments[s]);
      inject(audio, cfg.audio_dim, segments[s], audio_dir, cfg, rng);
    }
    if (kinds[s] != 0) {
      clip.annotation.visual_fake.push_back(segments[s]);
      inject(visual, cfg.visual_dim, segments[s], visual_dir, cfg, rng);
    }
  }
  clip.features.audio = to_f32_tensor(T, cfg.audio_dim, std::move(audio));
  clip.features.visual = to_f32_tensor(T, cfg.visual_dim, std::move(visual));
  return clip;
}

}  // namespace

FeatureStream FeatureStream::reversed() const {
  return {flip_rows(audio), flip_rows(visual)};
}

void SynthConfig::validate() const {
  auto positive = [](std::size_t v, const char* field) {
    if (v == 0) throw ConfigError(field, "must be positive");
  };
  positive(num_frames, "synth.num_frames");
  positive(audio_dim, "synth.audio_dim");
  positive(visual_dim, "synth.visual_dim");
  positive(min_length, "synth.min_length");
  if (num_frames % 4 != 0) {
    throw ConfigError("synth.num_frames",
                      "must be divisible by 4 (got " +
                          std::to_string(num_frames) + ")");
  }
  if (min_segments > max_segments) {
    throw ConfigError("synth.min_segments", "exceeds synth.max_segments");
  }
  if (min_length > max_length) {
    throw ConfigError("synth.min_length", "exceeds synth.max_length");
  }
  if (2 * edge_margin >= num_frames) {
    throw ConfigError("synth.edge_margin", "leaves no room inside the clip");
  }
  const std::size_t room = num_frames - 2 * edge_margin;
  if (max_segments > 0 && max_length > room) {
    throw ConfigError("synth.max_length",
                      "segment of length " + std::to_string(max_length) +
                          " cannot fit in " + std::to_string(num_frames) +
                          " frames with edge margin " +
                          std::to_string(edge_margin));
  }
  if (min_segments > 0 &&
      min_segments * min_length + (min_segments - 1) * edge_margin > room) {
    throw ConfigError("synth.min_segments",
                      "minimum segments of minimum length exceed the clip");
  }
  if (mix.audio_only < 0 || mix.visual_only < 0 || mix.both < 0 ||
      mix.audio_only + mix.visual_only + mix.both <= 0) {
    throw ConfigError("synth.mix",
                      "weights must be non-negative with a positive sum");
  }
  if (!(shift >= 0) || !std::isfinite(shift)) {
    throw ConfigError("synth.delta", "must be finite and >= 0");
  }
  if (!(noise > 0) || !std::isfinite(noise)) {
    throw ConfigError("synth.noise", "must be finite and > 0");
  }
  if (!(smoothing >= 0 && smoothing < 1)) {
    throw ConfigError("synth.smoothing", "must lie in [0, 1)");
  }
  if (!(direction_jitter >= 0) || !std::isfinite(direction_jitter)) {
    throw ConfigError("synth.direction_jitter", "must be finite and >= 0");
  }
}

double SynthConfig::expected_fake_fraction() const {
  const double mean_count = 0.5 * static_cast<double>(min_segments + max_segments);
  const double mean_length = 0.5 * static_cast<double>(min_length + max_length);
  return mean_count * mean_length / static_cast<double>(num_frames);
}

std::vector<Clip> generate_dataset(const SynthConfig& config,
                                   std::uint64_t seed) {
  config.validate();
  auto dir_rng = clip_rng(seed, kDirectionStream);
  const auto audio_dir = unit_vector(config.audio_dim, dir_rng);
  const auto visual_dir = unit_vector(config.visual_dim, dir_rng);

  std::vector<Clip> clips(config.count);
  const auto n = static_cast<long>(config.count);
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n; ++i) {
    clips[i] = make_clip(config, seed, static_cast<std::size_t>(i), audio_dir,
                         visual_dir);
  }
  return clips;
}

void assign_splits(std::vector<Clip>& clips) {
  const std::size_t n = clips.size();
  const std::size_t train = n * 8 / 11;
  const std::size_t val = n / 11;
  for (std::size_t i = 0; i < n; ++i) {
    clips[i].split = i < train ? "train" : (i < train + val ? "val" : "test");
  }
}

}  // namespace hbm
