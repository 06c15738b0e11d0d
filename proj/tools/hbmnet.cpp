#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "hbm/config.hpp"
#include "hbm/dataset_io.hpp"
#include "hbm/errors.hpp"
#include "hbm/labels.hpp"
#include "hbm/pipeline.hpp"
#include "hbm/plotdata.hpp"

namespace fs = std::filesystem;
using namespace hbm;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kGradcheckFailed = 3;

// Config problems map to the usage exit code; everything past loading is a
// runtime failure.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

RunConfig load_config(const Common& c, const RunConfig& fallback = RunConfig{}) {
  RunConfig cfg = fallback;
  try {
    if (!c.config.empty()) cfg = load_run_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the configured seed");
}

const Clip& find_clip(const std::vector<Clip>& clips, const std::string& id) {
  for (const auto& c : clips) {
    if (c.annotation.id == id) return c;
  }
  throw UsageError("no clip '" + id + "' in dataset");
}

std::vector<const Clip*> select(const std::vector<Clip>& clips,
                                const std::string& split) {
  if (split == "all") {
    std::vector<const Clip*> out;
    for (const auto& c : clips) out.push_back(&c);
    return out;
  }
  auto out = clips_in_split(clips, split);
  if (out.empty()) throw UsageError("dataset has no clips in split '" + split + "'");
  return out;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text(out, text);
  }
}

// --- synth -----------------------------------------------------------------

int cmd_synth(const Common& common, const std::string& out) {
  const auto cfg = load_config(common);
  const fs::path target(out);
  if (fs::exists(target) && !(fs::is_directory(target) && fs::is_empty(target))) {
    throw UsageError(out + " already exists and is not an empty directory");
  }
  // Build next to the target and rename, so a failure never leaves a
  // half-written dataset under the requested name.
  const fs::path parent = target.parent_path().empty() ? fs::path(".") : target.parent_path();
  fs::create_directories(parent);
  const fs::path staging = parent / (target.filename().string() + ".partial");
  fs::remove_all(staging);
  try {
    auto clips = generate_dataset(cfg.synth, cfg.seed);
    assign_splits(clips);
    save_dataset(staging, clips);
    write_text(staging / "config.json", cfg.to_json());
    if (fs::exists(target)) fs::remove(target);
    fs::rename(staging, target);
    std::map<std::string, std::size_t> counts;
    for (const auto& c : clips) ++counts[c.split];
    std::printf("wrote %zu clips to %s (train %zu, val %zu, test %zu)\n",
                clips.size(), out.c_str(), counts["train"], counts["val"],
                counts["test"]);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return kOk;
}

// --- labels ----------------------------------------------------------------

int cmd_labels(const Common& common, const std::string& data,
               const std::string& clip_id, bool map, const std::string& out) {
  const auto cfg = load_config(common);
  const auto clips = load_dataset(data);
  const auto& clip = clip_id.empty() ? clips.at(0) : find_clip(clips, clip_id);
  const auto& ann = clip.annotation;
  std::string text;
  if (map) {
    const auto m = build_boundary_map(ann, cfg.model.durations);
    text = "duration,start,iou\n";
    char buf[64];
    for (std::size_t i = 0; i < m.durations; ++i) {
      for (std::size_t j = 0; j < m.frames; ++j) {
        if (!m.in_range(i, j)) continue;
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f\n", i + 1, j, m.at(i, j));
        text += buf;
      }
    }
  } else {
    const auto y = build_frame_labels(ann);
    const auto f = build_prob_triplet(ann, cfg.inference.interval, Direction::forward);
    const auto b = build_prob_triplet(ann, cfg.inference.interval, Direction::backward);
    text = "frame,fake,start,end,content,bwd_start,bwd_end,bwd_content\n";
    const std::size_t T = ann.num_frames;
    char buf[160];
    for (std::size_t t = 0; t < T; ++t) {
      std::snprintf(buf, sizeof(buf), "%zu,%d,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n", t,
                    static_cast<int>(y.y[t]), f.start[t], f.end[t], f.content[t],
                    b.start[t], b.end[t], b.content[t]);
      text += buf;
    }
  }
  emit(out, text);
  return kOk;
}

// --- train -----------------------------------------------------------------

int cmd_train(const Common& common, const std::string& data, const std::string& out,
              const std::string& checkpoint) {
  const auto cfg = load_config(common);
  const auto clips = load_dataset(data);
  const auto train_set = select(clips, "train");
  const auto val_set = clips_in_split(clips, "val");

  fs::create_directories(out);
  const fs::path ckpt = checkpoint.empty() ? fs::path(out) / "checkpoint.bin" : fs::path(checkpoint);
  Model model(cfg.model, cfg.seed);
  std::printf("training on %zu clips (%zu validation), %zu parameters\n",
              train_set.size(), val_set.size(), parameter_count(cfg.model));
  const auto log = train(model, cfg, train_set, val_set, [](const EpochRow& r) {
    std::printf("epoch %3zu  train %.5f  val %.5f  lr %.3g\n", r.epoch,
                r.train_total, r.val_total, r.learning_rate);
    std::fflush(stdout);
  });
  save_checkpoint(ckpt, model);
  write_text(fs::path(out) / "config.json", cfg.to_json());
  write_text(fs::path(out) / "loss.csv", log.loss_csv());
  write_text(fs::path(out) / "epochs.csv", log.epoch_csv());
  std::printf("best epoch %zu; checkpoint %s\n", log.best_epoch, ckpt.string().c_str());
  return kOk;
}

// --- infer -----------------------------------------------------------------

RunConfig config_for_checkpoint(const Common& common, const fs::path& ckpt) {
  if (!common.config.empty()) return load_config(common);
  const auto beside = ckpt.parent_path() / "config.json";
  if (!fs::exists(beside)) {
    throw UsageError("no --config given and no config.json next to " + ckpt.string());
  }
  Common c = common;
  c.config = beside.string();
  return load_config(c);
}

int cmd_infer(const Common& common, const std::string& checkpoint,
              const std::string& data, const std::string& split,
              const std::string& out, bool forward_only) {
  const auto cfg = config_for_checkpoint(common, checkpoint);
  Model model(cfg.model, cfg.seed);
  load_checkpoint(checkpoint, model);
  const auto clips = load_dataset(data);
  const auto chosen = select(clips, split);
  const auto preds = predict_dataset(
      model, chosen, cfg.inference,
      forward_only ? ScoringMode::forward_only : ScoringMode::bidirectional);
  emit(out, predictions_to_json(preds));
  return kOk;
}

// --- eval ------------------------------------------------------------------

std::vector<ClipGroundTruth> load_ground_truth(const std::string& data,
                                               const std::string& split) {
  std::vector<ClipGroundTruth> gts;
  if (fs::is_directory(data)) {
    for (const Clip* c : select(load_dataset(data), split)) {
      gts.push_back({c->annotation.id, c->annotation.fake_union()});
    }
  } else {
    gts = ground_truth_from(load_annotations(data));
  }
  return gts;
}

int cmd_eval(const std::string& predictions, const std::string& data,
             const std::string& split, const std::string& out) {
  const auto preds = predictions_from_json(read_text(predictions), predictions);
  const auto report = evaluate(preds, load_ground_truth(data, split));
  const std::string csv = EvalReport::csv_header() + "\n" + report.csv_row() + "\n";
  if (out.empty() || out == "-") {
    std::cout << report.to_json() << "\n";
  } else {
    write_text(out, report.to_json() + "\n");
    write_text(fs::path(out).replace_extension(".csv"), csv);
  }
  std::cerr << csv;
  return kOk;
}

// --- gradcheck -------------------------------------------------------------

int cmd_gradcheck(const Common& common, const std::string& fault,
                  const std::string& out) {
  const auto cfg = load_config(common, tiny_config());
  std::optional<OpKind> op;
  if (!fault.empty()) {
    for (int k = 0; k <= static_cast<int>(OpKind::bm_collapse); ++k) {
      if (op_name(static_cast<OpKind>(k)) == fault) op = static_cast<OpKind>(k);
    }
    if (!op) throw UsageError("unknown op '" + fault + "' for --inject-fault");
  }
  testing::set_backward_fault(op);
  const auto rows = model_gradcheck(cfg);
  testing::set_backward_fault(std::nullopt);

  emit(out, gradcheck_csv(rows));
  std::map<std::string, double> worst;
  bool ok = true;
  for (const auto& r : rows) {
    worst[r.loss] = std::max(worst[r.loss], r.max_error);
    ok = ok && r.max_error <= kGradcheckTolerance;
  }
  for (const auto& [loss, e] : worst) {
    std::fprintf(stderr, "%-6s max relative error %.3e\n", loss.c_str(), e);
  }
  std::fprintf(stderr, "gradcheck %s (tolerance %.0e)\n", ok ? "passed" : "FAILED",
               kGradcheckTolerance);
  return ok ? kOk : kGradcheckFailed;
}

// --- plotdata --------------------------------------------------------------

int cmd_plotdata(const std::string& loss, const std::vector<std::string>& reports,
                 const std::string& out) {
  if (loss.empty() == reports.empty()) {
    throw UsageError("plotdata needs exactly one of --loss or --reports");
  }
  if (!loss.empty()) {
    emit(out, tidy_loss_csv(parse_loss_csv(read_text(loss), loss)));
    return kOk;
  }
  std::vector<NamedReport> named;
  for (const auto& path : reports) {
    named.push_back({fs::path(path).stem().string(),
                     eval_report_from_json(read_text(path), path)});
  }
  emit(out, merge_reports_csv(named));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HBMNet: temporal forgery localization on audio-visual feature streams"};
  app.require_subcommand(1);
  Common common;
  std::string data, out, checkpoint, split = "test", clip_id, fault, loss, predictions;
  std::vector<std::string> reports;
  bool map = false, forward_only = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  add_common(synth, common);
  synth->add_option("--out", out, "Dataset directory to create")->required();

  auto* labels = app.add_subcommand("labels", "Print the supervision targets of one clip");
  add_common(labels, common);
  labels->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  labels->add_option("--clip", clip_id, "Clip id (default: first clip)");
  labels->add_flag("--map", map, "Print the boundary map instead of frame labels");
  labels->add_option("--out", out, "Output CSV (default: stdout)");

  auto* trn = app.add_subcommand("train", "Train a model and write its checkpoint and loss logs");
  add_common(trn, common);
  trn->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  trn->add_option("--out", out, "Run directory for logs and config")->required();
  trn->add_option("--checkpoint", checkpoint, "Checkpoint path (default: <out>/checkpoint.bin)");

  auto* infer = app.add_subcommand("infer", "Predict proposals for a dataset split");
  add_common(infer, common);
  infer->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--split", split, "train, val, test or all")->capture_default_str();
  infer->add_option("--out", out, "Predictions JSON (default: stdout)");
  infer->add_flag("--forward-only", forward_only, "Score with the forward triplet only");

  auto* ev = app.add_subcommand("eval", "Score predictions against annotations");
  ev->add_option("--predictions", predictions, "Predictions JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "Dataset directory or annotations JSON")->required()->check(CLI::ExistingPath);
  ev->add_option("--split", split, "Split to score when --data is a directory")->capture_default_str();
  ev->add_option("--out", out, "Report JSON; a .csv twin is written beside it");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every parameter group");
  add_common(gc, common);
  gc->add_option("--out", out, "Report CSV (default: stdout)");
  gc->add_option("--inject-fault", fault)->group("");  // testing only

  auto* pd = app.add_subcommand("plotdata", "Export tidy CSV for plotting");
  pd->add_option("--loss", loss, "Loss CSV written by train")->check(CLI::ExistingFile);
  pd->add_option("--reports", reports, "Eval report JSON files to merge")->check(CLI::ExistingFile);
  pd->add_option("--out", out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(common, out);
    if (*labels) return cmd_labels(common, data, clip_id, map, out);
    if (*trn) return cmd_train(common, data, out, checkpoint);
    if (*infer) return cmd_infer(common, checkpoint, data, split, out, forward_only);
    if (*ev) return cmd_eval(predictions, data, split, out);
    if (*gc) return cmd_gradcheck(common, fault, out);
    if (*pd) return cmd_plotdata(loss, reports, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
