#include "hbm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

namespace hbm {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<std::vector<double>> snapshot(const std::vector<NamedTensor>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) {
    auto d = p.tensor.data();
    out.emplace_back(d.begin(), d.end());
  }
  return out;
}

void restore(const std::vector<NamedTensor>& params,
             const std::vector<std::vector<double>>& values) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = params[k].tensor;
    std::copy(values[k].begin(), values[k].end(), t.mutable_data().begin());
  }
}

}  // namespace

std::string TrainLog::loss_csv() const {
  std::string out = "step,L_FC,L_CP,L_FP,total\n";
  for (const auto& r : steps) {
    out += std::to_string(r.step) + "," + fmt(r.contrastive) + "," +
           fmt(r.proposal) + "," + fmt(r.frame) + "," + fmt(r.total) + "\n";
  }
  return out;
}

std::string TrainLog::epoch_csv() const {
  std::string out = "epoch,train_total,val_total,lr\n";
  for (const auto& r : epochs) {
    out += std::to_string(r.epoch) + "," + fmt(r.train_total) + "," +
           fmt(r.val_total) + "," + fmt(r.learning_rate) + "\n";
  }
  return out;
}

Optimizer::Optimizer(const OptimConfig& config, std::vector<NamedTensor> params)
    : config_(config), params_(std::move(params)), lr_(config.learning_rate) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(config.optimizer == OptimizerKind::adam ? p.tensor.numel() : 0, 0.0);
  }
}

void Optimizer::step(double grad_scale) {
  double norm2 = 0.0;
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) norm2 += g * g * grad_scale * grad_scale;
  }
  double scale = grad_scale;
  const double norm = std::sqrt(norm2);
  if (config_.grad_clip > 0 && norm > config_.grad_clip) {
    scale *= config_.grad_clip / norm;
  }
  ++t_;
  const double b1 = config_.adam_beta1, b2 = config_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor t = params_[k].tensor;
    if (!t.has_grad()) continue;
    auto g = t.grad();
    auto w = t.mutable_data();
    auto& m = m_[k];
    if (config_.optimizer == OptimizerKind::adam) {
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i] * scale;
        m[i] = b1 * m[i] + (1 - b1) * gi;
        v[i] = b2 * v[i] + (1 - b2) * gi * gi;
        w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.adam_eps);
      }
    } else {
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = config_.momentum * m[i] + g[i] * scale;
        w[i] -= lr_ * m[i];
      }
    }
    t.zero_grad();
  }
}

LossComponents clip_losses(const Model& model, const FeatureStream& features,
                           const ClipTargets& targets, const LossConfig& cfg) {
  return compute_losses(model.forward_full(features), targets, cfg);
}

double mean_loss(const Model& model, const std::vector<const Clip*>& clips,
                 const std::vector<ClipTargets>& targets, const LossConfig& cfg) {
  if (clips.empty()) return 0.0;
  std::vector<double> totals(clips.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < clips.size(); ++k) {
    NoGradGuard guard;
    totals[k] = total_loss(clip_losses(model, clips[k]->features, targets[k], cfg), cfg).item();
  }
  // Fixed summation order keeps the result independent of thread count.
  return std::accumulate(totals.begin(), totals.end(), 0.0) /
         static_cast<double>(clips.size());
}

TrainLog train(Model& model, const RunConfig& config,
               const std::vector<const Clip*>& train_clips,
               const std::vector<const Clip*>& val_clips,
               const EpochCallback& on_epoch) {
  config.validate();
  if (train_clips.empty()) throw std::invalid_argument("train: no training clips");
  const auto& mc = model.config();
  auto targets_for = [&](const std::vector<const Clip*>& clips) {
    std::vector<ClipTargets> out;
    for (const Clip* c : clips) {
      if (c->features.frames() != mc.frames ||
          c->features.audio.dim(1) != mc.audio_dim ||
          c->features.visual.dim(1) != mc.visual_dim) {
        throw std::invalid_argument(
            "train: clip " + c->annotation.id + " has shape T=" +
            std::to_string(c->features.frames()) + ", D_a=" +
            std::to_string(c->features.audio.dim(1)) + ", D_v=" +
            std::to_string(c->features.visual.dim(1)) +
            " but the model expects T=" + std::to_string(mc.frames) +
            ", D_a=" + std::to_string(mc.audio_dim) +
            ", D_v=" + std::to_string(mc.visual_dim));
      }
      out.push_back(build_targets(c->annotation, mc.durations, config.inference.interval));
    }
    return out;
  };
  const auto train_targets = targets_for(train_clips);
  const auto val_targets = targets_for(val_clips);

  const auto params = model.params().named();
  Optimizer opt(config.optim, params);
  model.zero_grad();

  std::mt19937_64 rng(config.seed ^ 0x5eedf00dULL);
  std::vector<std::size_t> order(train_clips.size());
  std::iota(order.begin(), order.end(), 0);

  TrainLog log;
  double best = std::numeric_limits<double>::infinity();
  auto best_values = snapshot(params);
  std::size_t stalled = 0;
  const std::size_t batch = config.optim.batch_size;

  for (std::size_t epoch = 1; epoch <= config.optim.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::size_t b1 = std::min(order.size(), b0 + batch);
      LossRow row;
      row.step = log.steps.size() + 1;
      for (std::size_t b = b0; b < b1; ++b) {
        const std::size_t k = order[b];
        LossComponents parts =
            clip_losses(model, train_clips[k]->features, train_targets[k], config.loss);
        Tensor total = total_loss(parts, config.loss);
        row.contrastive += parts.contrastive.item();
        row.proposal += parts.proposal.item();
        row.frame += parts.frame.item();
        row.total += total.item();
        backward(total);
      }
      const double n = static_cast<double>(b1 - b0);
      opt.step(1.0 / n);
      row.contrastive /= n;
      row.proposal /= n;
      row.frame /= n;
      row.total /= n;
      epoch_total += row.total * n;
      log.steps.push_back(row);
    }

    EpochRow er;
    er.epoch = epoch;
    er.train_total = epoch_total / static_cast<double>(order.size());
    er.val_total = val_clips.empty() ? er.train_total
                                     : mean_loss(model, val_clips, val_targets, config.loss);
    er.learning_rate = opt.learning_rate();
    log.epochs.push_back(er);
    if (on_epoch) on_epoch(er);

    if (er.val_total < best) {
      best = er.val_total;
      best_values = snapshot(params);
      log.best_epoch = epoch;
      stalled = 0;
    } else if (++stalled >= config.optim.patience) {
      opt.set_learning_rate(opt.learning_rate() * 0.5);
      stalled = 0;
    }
  }
  restore(params, best_values);
  model.zero_grad();
  return log;
}

std::vector<ScoredProposal> predict_clip(const Model& model,
                                         const FeatureStream& features,
                                         const InferenceConfig& cfg,
                                         ScoringMode mode) {
  NoGradGuard guard;
  const ForwardOutput out = model.forward_full(features);
  const ProbTriplet fwd = out.triplet(Direction::forward);
  const ProbTriplet fused = mode == ScoringMode::bidirectional
                                ? fuse_bidirectional(fwd, out.triplet(Direction::backward))
                                : fwd;
  return soft_nms(score_proposals(out.boundary_values(), fused), cfg.sigma,
                  cfg.score_floor, cfg.top_k);
}

std::vector<ClipPrediction> predict_dataset(const Model& model,
                                            const std::vector<const Clip*>& clips,
                                            const InferenceConfig& cfg,
                                            ScoringMode mode) {
  std::vector<ClipPrediction> out(clips.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < clips.size(); ++k) {
    out[k].id = clips[k]->annotation.id;
    out[k].proposals = predict_clip(model, clips[k]->features, cfg, mode);
  }
  return out;
}

std::vector<const Clip*> clips_in_split(const std::vector<Clip>& clips,
                                        const std::string& split) {
  std::vector<const Clip*> out;
  for (const auto& c : clips) {
    if (c.split == split) out.push_back(&c);
  }
  return out;
}

}  // namespace hbm

namespace hbm {

std::vector<GradcheckRow> model_gradcheck(const RunConfig& config) {
  config.validate();
  SynthConfig synth = config.synth;
  synth.count = 1;
  // At least one fake segment so the contrastive push and the boundary labels
  // are all exercised.
  synth.min_segments = std::max<std::size_t>(synth.min_segments, 1);
  synth.max_segments = std::max(synth.max_segments, synth.min_segments);
  const auto clip = generate_dataset(synth, config.seed).front();
  Model model(config.model, config.seed);
  const auto targets = build_targets(clip.annotation, config.model.durations,
                                     config.inference.interval);

  using Pick = Tensor (*)(const LossComponents&, const LossConfig&);
  const std::pair<const char*, Pick> losses[] = {
      {"L_FC", [](const LossComponents& c, const LossConfig&) { return c.contrastive; }},
      {"L_CP", [](const LossComponents& c, const LossConfig&) { return c.proposal; }},
      {"L_FP", [](const LossComponents& c, const LossConfig&) { return c.frame; }},
      {"total", [](const LossComponents& c, const LossConfig& cfg) { return total_loss(c, cfg); }},
  };
  std::vector<GradcheckRow> rows;
  for (const auto& [name, pick] : losses) {
    auto loss = [&, pick = pick] {
      return pick(clip_losses(model, clip.features, targets, config.loss), config.loss);
    };
    for (const auto& r : grad_check_params(loss, model.params().named())) {
      rows.push_back({name, r.name, r.count, r.max_error});
    }
  }
  return rows;
}

std::string gradcheck_csv(const std::vector<GradcheckRow>& rows) {
  std::string out = "loss,param,count,max_rel_error,pass\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", r.max_error);
    out += r.loss + "," + r.param + "," + std::to_string(r.count) + "," + buf +
           "," + (r.max_error <= kGradcheckTolerance ? "yes" : "no") + "\n";
  }
  return out;
}

}  // namespace hbm
