#include <doctest.h>
#include <omp.h>

#include <filesystem>

#include "hbm/dataset_io.hpp"
#include "hbm/pipeline.hpp"

using namespace hbm;
namespace fs = std::filesystem;

namespace {

RunConfig small_run() {
  RunConfig c;
  c.model.frames = 32;
  c.model.audio_dim = c.model.visual_dim = 4;
  c.model.channels = 6;
  c.model.durations = 8;
  c.model.samples = 4;
  c.model.cpg_hidden = 3;
  c.model.fpg_hidden = 4;
  c.synth.num_frames = 32;
  c.synth.audio_dim = c.synth.visual_dim = 4;
  c.synth.count = 10;
  c.synth.min_length = 2;
  c.synth.max_length = 8;
  c.optim.epochs = 1;
  c.optim.batch_size = 3;
  return c;
}

}  // namespace

TEST_CASE("one epoch on ten clips writes a loadable checkpoint") {
  const auto cfg = small_run();
  auto clips = generate_dataset(cfg.synth, cfg.seed);
  std::vector<const Clip*> all;
  for (const auto& c : clips) all.push_back(&c);
  Model model(cfg.model, cfg.seed);
  const auto log = train(model, cfg, all, {});
  CHECK(log.steps.size() == 4);
  CHECK(log.epochs.size() == 1);
  CHECK(log.loss_csv().rfind("step,L_FC,L_CP,L_FP,total\n", 0) == 0);

  const auto path = fs::temp_directory_path() / "hbm_test_smoke.ckpt";
  save_checkpoint(path, model);
  Model reloaded(cfg.model, 999);
  CHECK_NOTHROW(load_checkpoint(path, reloaded));
  const auto a = predict_clip(model, clips[0].features, cfg.inference);
  const auto b = predict_clip(reloaded, clips[0].features, cfg.inference);
  CHECK(a == b);
  fs::remove(path);
}

TEST_CASE("training and inference are deterministic across thread counts") {
  auto cfg = small_run();
  cfg.optim.epochs = 2;
  auto clips = generate_dataset(cfg.synth, 3);
  std::vector<const Clip*> tr;
  for (std::size_t k = 0; k < 7; ++k) tr.push_back(&clips[k]);
  std::vector<const Clip*> va{&clips[7], &clips[8], &clips[9]};

  auto run = [&](int threads) {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(threads);
    Model m(cfg.model, 5);
    const auto log = train(m, cfg, tr, va);
    const auto preds = predict_dataset(m, va, cfg.inference);
    omp_set_num_threads(saved);
    return std::pair{log.loss_csv() + log.epoch_csv(), predictions_to_json(preds)};
  };
  const auto one = run(1), three = run(3);
  CHECK(one.first == three.first);
  CHECK(one.second == three.second);
}

TEST_CASE("predictions are sorted and bounded by top_k") {
  auto cfg = small_run();
  cfg.inference.top_k = 5;
  auto clips = generate_dataset(cfg.synth, 4);
  Model m(cfg.model, 6);
  const auto p = predict_clip(m, clips[0].features, cfg.inference);
  CHECK(p.size() <= 5);
  for (std::size_t k = 1; k < p.size(); ++k) CHECK(p[k - 1].score >= p[k].score);
  for (const auto& s : p) CHECK((s.score >= 0.0 && s.score <= 1.0));
}

TEST_CASE("training rejects clips that do not fit the model") {
  auto cfg = small_run();
  auto clips = generate_dataset(cfg.synth, 1);
  auto other = cfg;
  other.model.audio_dim = 5;
  Model m(other.model, 1);
  std::vector<const Clip*> all{&clips[0]};
  CHECK_THROWS_AS(train(m, other, all, {}), std::invalid_argument);
}
