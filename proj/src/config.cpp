#include "hbm/config.hpp"

#include <cmath>
#include <json.hpp>
#include <set>

#include "hbm/dataset_io.hpp"
#include "hbm/errors.hpp"

namespace hbm {

using nlohmann::json;

namespace {

// Reads typed keys out of one JSON object, naming "<section>.<key>" in every
// error, and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& parent, std::string name) : name_(std::move(name)) {
    if (!parent.contains(name_)) return;
    obj_ = &parent.at(name_);
    if (!obj_->is_object()) throw ConfigError(name_, "must be an object");
  }
  Section(const json* obj, std::string name) : obj_(obj), name_(std::move(name)) {}

  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) {
        throw ConfigError(field(key), "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  const json* child(const char* key) {
    const json* v = find(key);
    if (v && !v->is_object()) throw ConfigError(field(key), "must be an object");
    return v;
  }
  std::string field(const char* key) const { return name_ + "." + key; }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.count(key)) throw ConfigError(name_ + "." + key, "unknown key");
    }
  }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return nullptr;
    return &obj_->at(key);
  }

  const json* obj_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

const char* optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

}  // namespace

void OptimConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("optim.lr", "must be finite and > 0");
  }
  if (!(momentum >= 0 && momentum < 1)) {
    throw ConfigError("optim.momentum", "must lie in [0, 1)");
  }
  if (!(adam_beta1 >= 0 && adam_beta1 < 1)) {
    throw ConfigError("optim.adam_beta1", "must lie in [0, 1)");
  }
  if (!(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("optim.adam_beta2", "must lie in [0, 1)");
  }
  if (!(adam_eps > 0)) throw ConfigError("optim.adam_eps", "must be > 0");
  if (epochs == 0) throw ConfigError("optim.epochs", "must be positive");
  if (batch_size == 0) throw ConfigError("optim.batch_size", "must be positive");
  if (patience == 0) throw ConfigError("optim.patience", "must be positive");
  if (!(grad_clip >= 0) || !std::isfinite(grad_clip)) {
    throw ConfigError("optim.grad_clip", "must be finite and >= 0");
  }
}

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  optim.validate();
  inference.validate();
  SynthConfig s = synth;
  s.num_frames = model.frames;
  s.audio_dim = model.audio_dim;
  s.visual_dim = model.visual_dim;
  s.validate();
}

std::string RunConfig::to_json() const {
  json doc;
  doc["model"] = {{"T", model.frames},          {"C", model.channels},
                  {"L", model.durations},       {"N", model.samples},
                  {"D_a", model.audio_dim},     {"D_v", model.visual_dim},
                  {"cpg_hidden", model.cpg_hidden},
                  {"fpg_hidden", model.fpg_hidden},
                  {"init_scale", model.init_scale}};
  doc["loss"] = {{"alpha", loss.alpha}, {"m", loss.margin},
                 {"beta0", loss.beta0}, {"beta1", loss.beta1},
                 {"theta", loss.label_threshold}};
  doc["optim"] = {{"optimizer", optimizer_name(optim.optimizer)},
                  {"lr", optim.learning_rate},
                  {"momentum", optim.momentum},
                  {"adam_beta1", optim.adam_beta1},
                  {"adam_beta2", optim.adam_beta2},
                  {"adam_eps", optim.adam_eps},
                  {"epochs", optim.epochs},
                  {"batch_size", optim.batch_size},
                  {"patience", optim.patience},
                  {"grad_clip", optim.grad_clip}};
  doc["inference"] = {{"sigma", inference.sigma},
                      {"score_floor", inference.score_floor},
                      {"top_k", inference.top_k},
                      {"d_f", inference.interval}};
  doc["synth"] = {{"count", synth.count},
                  {"min_segments", synth.min_segments},
                  {"max_segments", synth.max_segments},
                  {"min_length", synth.min_length},
                  {"max_length", synth.max_length},
                  {"edge_margin", synth.edge_margin},
                  {"delta", synth.shift},
                  {"noise", synth.noise},
                  {"smoothing", synth.smoothing},
                  {"direction_jitter", synth.direction_jitter},
                  {"mix", {{"audio_only", synth.mix.audio_only},
                           {"visual_only", synth.mix.visual_only},
                           {"both", synth.mix.both}}}};
  doc["seed"] = seed;
  return doc.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");

  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    static const std::set<std::string> known{"model", "loss", "optim",
                                             "inference", "synth", "seed"};
    if (!known.count(key)) throw ConfigError(key, "unknown section");
  }

  Section m(doc, "model");
  m.get("T", cfg.model.frames);
  m.get("C", cfg.model.channels);
  m.get("L", cfg.model.durations);
  m.get("N", cfg.model.samples);
  m.get("D_a", cfg.model.audio_dim);
  m.get("D_v", cfg.model.visual_dim);
  m.get("cpg_hidden", cfg.model.cpg_hidden);
  m.get("fpg_hidden", cfg.model.fpg_hidden);
  m.get("init_scale", cfg.model.init_scale);
  m.finish();

  Section l(doc, "loss");
  l.get("alpha", cfg.loss.alpha);
  l.get("m", cfg.loss.margin);
  l.get("beta0", cfg.loss.beta0);
  l.get("beta1", cfg.loss.beta1);
  l.get("theta", cfg.loss.label_threshold);
  l.finish();

  Section o(doc, "optim");
  std::string opt = optimizer_name(cfg.optim.optimizer);
  o.get("optimizer", opt);
  if (opt == "sgd") {
    cfg.optim.optimizer = OptimizerKind::sgd;
  } else if (opt == "adam") {
    cfg.optim.optimizer = OptimizerKind::adam;
  } else {
    throw ConfigError("optim.optimizer", "expected \"sgd\" or \"adam\", got \"" + opt + "\"");
  }
  o.get("lr", cfg.optim.learning_rate);
  o.get("momentum", cfg.optim.momentum);
  o.get("adam_beta1", cfg.optim.adam_beta1);
  o.get("adam_beta2", cfg.optim.adam_beta2);
  o.get("adam_eps", cfg.optim.adam_eps);
  o.get("epochs", cfg.optim.epochs);
  o.get("batch_size", cfg.optim.batch_size);
  o.get("patience", cfg.optim.patience);
  o.get("grad_clip", cfg.optim.grad_clip);
  o.finish();

  Section inf(doc, "inference");
  inf.get("sigma", cfg.inference.sigma);
  inf.get("score_floor", cfg.inference.score_floor);
  inf.get("top_k", cfg.inference.top_k);
  inf.get("d_f", cfg.inference.interval);
  inf.finish();

  Section s(doc, "synth");
  s.get("count", cfg.synth.count);
  s.get("min_segments", cfg.synth.min_segments);
  s.get("max_segments", cfg.synth.max_segments);
  s.get("min_length", cfg.synth.min_length);
  s.get("max_length", cfg.synth.max_length);
  s.get("edge_margin", cfg.synth.edge_margin);
  s.get("delta", cfg.synth.shift);
  s.get("noise", cfg.synth.noise);
  s.get("smoothing", cfg.synth.smoothing);
  s.get("direction_jitter", cfg.synth.direction_jitter);
  if (const json* mix = s.child("mix")) {
    Section mx(mix, "synth.mix");
    mx.get("audio_only", cfg.synth.mix.audio_only);
    mx.get("visual_only", cfg.synth.mix.visual_only);
    mx.get("both", cfg.synth.mix.both);
    mx.finish();
  }
  s.finish();

  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }

  cfg.synth.num_frames = cfg.model.frames;
  cfg.synth.audio_dim = cfg.model.audio_dim;
  cfg.synth.visual_dim = cfg.model.visual_dim;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_text(path), path.string());
}

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.model.frames = 16;
  cfg.model.channels = 4;
  cfg.model.durations = 4;
  cfg.model.samples = 4;
  cfg.model.audio_dim = 4;
  cfg.model.visual_dim = 4;
  cfg.model.cpg_hidden = 2;
  cfg.model.fpg_hidden = 3;
  cfg.model.init_scale = 0.5;
  cfg.synth.num_frames = 16;
  cfg.synth.audio_dim = 4;
  cfg.synth.visual_dim = 4;
  cfg.synth.count = 4;
  cfg.synth.min_segments = 1;
  cfg.synth.max_segments = 2;
  cfg.synth.min_length = 2;
  cfg.synth.max_length = 5;
  return cfg;
}

}  // namespace hbm
