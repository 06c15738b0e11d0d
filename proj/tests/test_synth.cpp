#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hbm/dataset_io.hpp"
#include "hbm/errors.hpp"
#include "hbm/labels.hpp"
#include "hbm/synth.hpp"

using namespace hbm;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config(std::size_t count = 20) {
  SynthConfig c;
  c.count = count;
  c.num_frames = 32;
  c.audio_dim = 4;
  c.visual_dim = 3;
  c.min_length = 2;
  c.max_length = 8;
  return c;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hbm_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("zero segments per clip gives all-real annotations") {
  auto c = small_config();
  c.min_segments = c.max_segments = 0;
  for (const auto& clip : generate_dataset(c, 5)) {
    CHECK(clip.annotation.audio_fake.empty());
    CHECK(clip.annotation.visual_fake.empty());
    for (auto y : build_frame_labels(clip.annotation).y) CHECK(y == 0);
  }
}

TEST_CASE("generated segments satisfy their invariants") {
  auto clips = generate_dataset(small_config(200), 9);
  for (const auto& clip : clips) {
    const auto& a = clip.annotation;
    CHECK_NOTHROW(a.validate());
    for (const auto* list : {&a.audio_fake, &a.visual_fake}) {
      for (std::size_t k = 0; k < list->size(); ++k) {
        CHECK((*list)[k].start < (*list)[k].end);
        CHECK((*list)[k].end <= a.num_frames);
        if (k) CHECK((*list)[k - 1].end <= (*list)[k].start);
      }
    }
    CHECK(clip.features.frames() == 32);
    for (double v : clip.features.audio.data()) CHECK(double(float(v)) == v);
  }
}

TEST_CASE("same seed gives identical datasets regardless of thread count") {
  const auto c = small_config(30);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto a = generate_dataset(c, 123);
  omp_set_num_threads(3);
  auto b = generate_dataset(c, 123);
  omp_set_num_threads(saved);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].annotation == b[k].annotation);
    CHECK(encode_features(a[k].features) == encode_features(b[k].features));
  }
  auto other = generate_dataset(c, 124);
  CHECK(encode_features(other[0].features) != encode_features(a[0].features));
}

TEST_CASE("default config fake fraction is in range and matches the analytic value") {
  SynthConfig c;
  c.count = 1000;
  const auto clips = generate_dataset(c, 42);
  double fake = 0, total = 0;
  for (const auto& clip : clips) {
    for (auto y : build_frame_labels(clip.annotation).y) fake += y;
    total += static_cast<double>(clip.annotation.num_frames);
  }
  const double frac = fake / total;
  CHECK(frac >= 0.1);
  CHECK(frac <= 0.5);
  const double expected = c.expected_fake_fraction();
  CHECK(std::abs(frac - expected) / expected <= 0.05);
}

TEST_CASE("delta zero leaves fake frames statistically like real ones") {
  auto c = small_config(200);
  c.shift = 0.0;
  double fake_sum = 0, fake_n = 0, real_sum = 0, real_n = 0;
  for (const auto& clip : generate_dataset(c, 3)) {
    const auto y = build_frame_labels(clip.annotation).y;
    const auto d = clip.features.audio.data();
    for (std::size_t t = 0; t < y.size(); ++t) {
      for (std::size_t k = 0; k < c.audio_dim; ++k) {
        (y[t] ? fake_sum : real_sum) += d[t * c.audio_dim + k];
        (y[t] ? fake_n : real_n) += 1;
      }
    }
  }
  CHECK(std::abs(fake_sum / fake_n - real_sum / real_n) < 0.1);
}

TEST_CASE("infeasible configs are rejected with the field name") {
  auto c = small_config();
  c.max_length = 40;
  try {
    generate_dataset(c, 1);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "synth.max_length");
  }
  c = small_config();
  c.num_frames = 30;
  CHECK_THROWS_AS(generate_dataset(c, 1), ConfigError);
  c = small_config();
  c.min_length = 9;
  CHECK_THROWS_AS(generate_dataset(c, 1), ConfigError);
}

TEST_CASE("splits follow the 8:1:2 proportions") {
  SynthConfig c;
  auto clips = generate_dataset(c, 42);
  assign_splits(clips);
  std::size_t tr = 0, va = 0, te = 0;
  for (const auto& clip : clips) {
    tr += clip.split == "train";
    va += clip.split == "val";
    te += clip.split == "test";
  }
  CHECK(tr == 200);
  CHECK(va == 25);
  CHECK(te == 50);
}

TEST_CASE("dataset round-trips bit-exactly") {
  auto clips = generate_dataset(small_config(100), 77);
  assign_splits(clips);
  const auto dir = temp_dir("roundtrip");
  save_dataset(dir, clips);
  const auto loaded = load_dataset(dir);
  REQUIRE(loaded.size() == clips.size());
  for (std::size_t k = 0; k < clips.size(); ++k) {
    CHECK(loaded[k].annotation == clips[k].annotation);
    CHECK(loaded[k].split == clips[k].split);
    CHECK(same_values(loaded[k].features.audio, clips[k].features.audio));
    CHECK(same_values(loaded[k].features.visual, clips[k].features.visual));
  }
  fs::remove_all(dir);
}

TEST_CASE("empty dataset round-trips") {
  const auto dir = temp_dir("empty");
  save_dataset(dir, {});
  CHECK(load_dataset(dir).empty());
  fs::remove_all(dir);
}

TEST_CASE("truncated feature file raises a parse error with an offset") {
  auto clips = generate_dataset(small_config(1), 1);
  auto bytes = encode_features(clips[0].features);
  bytes.resize(bytes.size() / 2 + 1);
  try {
    decode_features(bytes, "clip.hbml");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset().has_value());
  }
}

TEST_CASE("feature version mismatch is reported") {
  auto clips = generate_dataset(small_config(1), 1);
  auto bytes = encode_features(clips[0].features);
  bytes[4] = 9;  // version field follows the magic
  CHECK_THROWS_AS(decode_features(bytes), VersionError);
  bytes = encode_features(clips[0].features);
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_features(bytes), ParseError);
}

TEST_CASE("malformed annotation JSON carries a byte offset") {
  try {
    annotations_from_json("[{\"id\": \"a\", ", "ann.json");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset().has_value());
  }
  CHECK_THROWS_AS(annotations_from_json("[{\"id\": 3}]", "ann.json"), ParseError);
}

TEST_CASE("annotation JSON uses the [[s, e], ...] layout") {
  StreamAnnotation a{"x", 10, {{2, 5}}, {{4, 7}}};
  const auto text = annotations_to_json({a});
  CHECK(text.find("\"audio_fake\"") != std::string::npos);
  const auto back = annotations_from_json(text, "mem");
  REQUIRE(back.size() == 1);
  CHECK(back[0] == a);
}
