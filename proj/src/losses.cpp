#include "hbm/losses.hpp"

#include <cmath>

#include "hbm/errors.hpp"
#include "hbm/ops.hpp"

namespace hbm {

using namespace ops;

namespace {

// Keeps log() finite when a sigmoid saturates.
constexpr double kProbEps = 1e-12;

Tensor constant(Shape shape, std::vector<double> values) {
  return Tensor::from_data(std::move(shape), std::move(values));
}

}  // namespace

void LossConfig::validate() const {
  if (!(alpha >= 0) || !std::isfinite(alpha)) {
    throw ConfigError("loss.alpha", "must be finite and >= 0");
  }
  if (!(margin > 0) || !std::isfinite(margin)) {
    throw ConfigError("loss.margin", "must be finite and > 0");
  }
  if (!(beta0 > 0 && beta0 < 1)) {
    throw ConfigError("loss.beta0", "must lie in (0, 1)");
  }
  if (!(beta1 >= 0) || !std::isfinite(beta1)) {
    throw ConfigError("loss.beta1", "must be finite and >= 0");
  }
  if (!(label_threshold > 0 && label_threshold < 1)) {
    throw ConfigError("loss.theta", "must lie in (0, 1)");
  }
}

Tensor contrastive_loss(const Tensor& av_fwd, const Tensor& va_fwd,
                        const Tensor& av_bwd, const Tensor& va_bwd,
                        const FrameLabels& labels, const LossConfig& cfg) {
  const Shape& s = av_fwd.shape();
  for (const Tensor* t : {&va_fwd, &av_bwd, &va_bwd}) {
    if (t->shape() != s) {
      throw ShapeError("contrastive_loss: embeddings disagree, " +
                       shape_str(s) + " vs " + shape_str(t->shape()));
    }
  }
  if (s.size() != 2 || labels.y.size() != s[0]) {
    throw ShapeError("contrastive_loss: labels of length " +
                     std::to_string(labels.y.size()) +
                     " for embeddings " + shape_str(s));
  }
  const std::size_t T = s[0];
  auto distance = [](const Tensor& a, const Tensor& b) {
    Tensor diff = sub(a, b);
    return sqrt(sum(mul(diff, diff), 1));  // [T]
  };
  Tensor d = add(distance(av_fwd, va_fwd), flip(distance(av_bwd, va_bwd), 0));

  std::vector<double> fake = labels.as_double();
  std::vector<double> real(T);
  for (std::size_t t = 0; t < T; ++t) real[t] = 1.0 - fake[t];

  Tensor pull = mul(mul(d, d), constant({T}, real));
  Tensor hinge = relu(add_scalar(scalar_mul(d, -1.0), cfg.margin));
  Tensor push = mul(mul(hinge, hinge), constant({T}, std::move(fake)));
  return mean(add(pull, push));
}

Tensor cpg_loss(const Tensor& predicted, const BoundaryMap& truth) {
  const Shape expect{truth.durations, truth.frames};
  if (predicted.shape() != expect) {
    throw ShapeError("cpg_loss: prediction " + shape_str(predicted.shape()) +
                     " vs ground truth " + shape_str(expect));
  }
  const std::size_t count = truth.in_range_count();
  if (count == 0) {
    throw ShapeError("cpg_loss: boundary map has no in-range cells");
  }
  Tensor diff = mul(sub(predicted, constant(expect, truth.values)),
                    constant(expect, truth.mask()));
  return scalar_mul(sum(mul(diff, diff)), 1.0 / static_cast<double>(count));
}

Tensor focal_loss(const Tensor& predicted, const std::vector<double>& truth,
                  const LossConfig& cfg) {
  const std::size_t T = truth.size();
  if (predicted.numel() != T) {
    throw ShapeError("focal_loss: prediction " + shape_str(predicted.shape()) +
                     " vs " + std::to_string(T) + " labels");
  }
  for (double p : predicted.data()) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::domain_error("focal_loss: prediction " + std::to_string(p) +
                              " outside [0, 1]");
    }
  }
  // p_hat = g p + (1 - g)(1 - p) = (2g - 1) p + (1 - g)
  std::vector<double> slope(T), offset(T), weight(T);
  for (std::size_t t = 0; t < T; ++t) {
    const bool positive = truth[t] > cfg.label_threshold;
    slope[t] = positive ? 1.0 : -1.0;
    offset[t] = positive ? 0.0 : 1.0;
    weight[t] = positive ? cfg.beta0 : 1.0 - cfg.beta0;
  }
  Tensor p = clamp(reshape(predicted, {T}), kProbEps, 1.0 - kProbEps);
  Tensor p_hat = add(mul(p, constant({T}, std::move(slope))),
                     constant({T}, std::move(offset)));
  Tensor focus = pow(add_scalar(scalar_mul(p_hat, -1.0), 1.0), cfg.beta1);
  Tensor bce = scalar_mul(log(p_hat), -1.0);
  return mean(mul(mul(focus, bce), constant({T}, std::move(weight))));
}

Tensor fpg_loss(const Tensor& pred_fwd, const Tensor& pred_bwd,
                const ProbTriplet& true_fwd, const ProbTriplet& true_bwd,
                const LossConfig& cfg) {
  for (const Tensor* t : {&pred_fwd, &pred_bwd}) {
    if (t->rank() != 2 || t->dim(1) != 3 || t->dim(0) != true_fwd.frames()) {
      throw ShapeError("fpg_loss: predictions must be [T x 3] with T = " +
                       std::to_string(true_fwd.frames()) + ", got " +
                       shape_str(t->shape()));
    }
  }
  const std::size_t T = pred_fwd.dim(0);
  Tensor total;
  auto accumulate = [&](const Tensor& pred, const ProbTriplet& truth) {
    const std::vector<double>* channels[3] = {&truth.start, &truth.end,
                                              &truth.content};
    for (std::size_t c = 0; c < 3; ++c) {
      Tensor term = focal_loss(reshape(slice(pred, 1, c, c + 1), {T}),
                               *channels[c], cfg);
      total = total.defined() ? add(total, term) : term;
    }
  };
  accumulate(pred_fwd, true_fwd);
  accumulate(pred_bwd, true_bwd);
  return total;
}

Tensor total_loss(const LossComponents& parts, const LossConfig& cfg) {
  return add(add(scalar_mul(parts.contrastive, cfg.alpha), parts.proposal),
             parts.frame);
}

ClipTargets build_targets(const StreamAnnotation& ann, std::size_t durations,
                          double interval) {
  return {build_frame_labels(ann), build_boundary_map(ann, durations),
          build_prob_triplet(ann, interval, Direction::forward),
          build_prob_triplet(ann, interval, Direction::backward)};
}

LossComponents compute_losses(const ForwardOutput& out,
                              const ClipTargets& targets,
                              const LossConfig& cfg) {
  return {contrastive_loss(out.fwd.f_av, out.fwd.f_va, out.bwd.f_av,
                           out.bwd.f_va, targets.frame_labels, cfg),
          cpg_loss(out.boundary_map, targets.boundary),
          fpg_loss(out.fpg_fwd, out.fpg_bwd, targets.triplet_fwd,
                   targets.triplet_bwd, cfg)};
}

}  // namespace hbm
