#include "hbm/model.hpp"

#include <cmath>
#include <random>

#include "hbm/dataset_io.hpp"
#include "hbm/errors.hpp"
#include "hbm/ops.hpp"

namespace hbm {

namespace {

using namespace ops;

void positive(std::size_t v, const char* field) {
  if (v == 0) throw ConfigError(field, "must be positive");
}

}  // namespace

void ModelConfig::validate() const {
  positive(frames, "model.T");
  positive(audio_dim, "model.D_a");
  positive(visual_dim, "model.D_v");
  positive(channels, "model.C");
  positive(durations, "model.L");
  positive(cpg_hidden, "model.cpg_hidden");
  positive(fpg_hidden, "model.fpg_hidden");
  if (frames % 4 != 0) {
    throw ConfigError("model.T", "must be divisible by 4 for the FPG pooling "
                                 "stages (got " + std::to_string(frames) + ")");
  }
  if (samples < 2) {
    throw ConfigError("model.N",
                      "must be >= 2 (got " + std::to_string(samples) + ")");
  }
  if (durations > frames) {
    throw ConfigError("model.L", "must not exceed model.T (got " +
                                     std::to_string(durations) + " > " +
                                     std::to_string(frames) + ")");
  }
  if (!(init_scale > 0) || !std::isfinite(init_scale)) {
    throw ConfigError("model.init_scale", "must be finite and > 0");
  }
}

std::vector<NamedTensor> ModelParams::named() const {
  return {
      {"audio_encoder.w", audio_w},   {"audio_encoder.b", audio_b},
      {"visual_encoder.w", visual_w}, {"visual_encoder.b", visual_b},
      {"attn_av.q", av_q},            {"attn_av.k", av_k},
      {"attn_av.v", av_v},            {"attn_va.q", va_q},
      {"attn_va.k", va_k},            {"attn_va.v", va_v},
      {"fusion.w", fuse_w},           {"fusion.b", fuse_b},
      {"classifier.w", cls_w},        {"classifier.b", cls_b},
      {"cpg.sample_w", cpg_sample_w}, {"cpg.conv_w", cpg_conv_w},
      {"cpg.conv_b", cpg_conv_b},     {"cpg.out_w", cpg_out_w},
      {"cpg.out_b", cpg_out_b},       {"fpg.enc1_w", fpg_enc1_w},
      {"fpg.enc1_b", fpg_enc1_b},     {"fpg.enc2_w", fpg_enc2_w},
      {"fpg.enc2_b", fpg_enc2_b},     {"fpg.mid_w", fpg_mid_w},
      {"fpg.mid_b", fpg_mid_b},       {"fpg.dec2_w", fpg_dec2_w},
      {"fpg.dec2_b", fpg_dec2_b},     {"fpg.dec1_w", fpg_dec1_w},
      {"fpg.dec1_b", fpg_dec1_b},     {"fpg.head_w", fpg_head_w},
      {"fpg.head_b", fpg_head_b},
  };
}

std::size_t parameter_count(const ModelConfig& m) {
  const std::size_t C = m.channels, Cf = m.channels + 1, Hc = m.cpg_hidden,
                    Hf = m.fpg_hidden, N = m.samples;
  return 3 * C * (m.audio_dim + m.visual_dim) + 2 * C  //
         + 6 * C * C                                   //
         + 2 * C * C + C + C + 1                       //
         + N + 9 * Cf * Hc + Hc + Hc + 1               //
         + 3 * Cf * Hf + 2 * 3 * Hf * Hf + 2 * 6 * Hf * Hf + 5 * Hf + 3 * Hf +
         3;
}

Model::Model(const ModelConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  mask_ = build_sampling_mask(config_.durations, config_.frames,
                              config_.samples);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-config_.init_scale,
                                             config_.init_scale);
  auto weight = [&](Shape shape) {
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = uni(rng);
    return Tensor::from_data(std::move(shape), std::move(v), true);
  };
  auto bias = [](std::size_t n) { return Tensor::zeros({n}, true); };

  const std::size_t C = config_.channels, Cf = C + 1, Hc = config_.cpg_hidden,
                    Hf = config_.fpg_hidden;
  auto& p = params_;
  p.audio_w = weight({3, config_.audio_dim, C});
  p.audio_b = bias(C);
  p.visual_w = weight({3, config_.visual_dim, C});
  p.visual_b = bias(C);
  p.av_q = weight({C, C});
  p.av_k = weight({C, C});
  p.av_v = weight({C, C});
  p.va_q = weight({C, C});
  p.va_k = weight({C, C});
  p.va_v = weight({C, C});
  p.fuse_w = weight({2 * C, C});
  p.fuse_b = bias(C);
  p.cls_w = weight({C, 1});
  p.cls_b = bias(1);
  p.cpg_sample_w = weight({config_.samples});
  p.cpg_conv_w = weight({3, 3, Cf, Hc});
  p.cpg_conv_b = bias(Hc);
  p.cpg_out_w = weight({Hc, 1});
  p.cpg_out_b = bias(1);
  p.fpg_enc1_w = weight({3, Cf, Hf});
  p.fpg_enc1_b = bias(Hf);
  p.fpg_enc2_w = weight({3, Hf, Hf});
  p.fpg_enc2_b = bias(Hf);
  p.fpg_mid_w = weight({3, Hf, Hf});
  p.fpg_mid_b = bias(Hf);
  p.fpg_dec2_w = weight({3, 2 * Hf, Hf});
  p.fpg_dec2_b = bias(Hf);
  p.fpg_dec1_w = weight({3, 2 * Hf, Hf});
  p.fpg_dec1_b = bias(Hf);
  p.fpg_head_w = weight({Hf, 3});
  p.fpg_head_b = bias(3);
}

void Model::check_stream(const FeatureStream& stream) const {
  const Shape audio{config_.frames, config_.audio_dim};
  const Shape visual{config_.frames, config_.visual_dim};
  if (stream.audio.shape() != audio || stream.visual.shape() != visual) {
    throw ShapeError("model: stream audio " + shape_str(stream.audio.shape()) +
                     " / visual " + shape_str(stream.visual.shape()) +
                     " does not match config " + shape_str(audio) + " / " +
                     shape_str(visual));
  }
}

namespace {

struct AttentionOut {
  Tensor out;
  Tensor weights;
};

// Single-head scaled dot-product cross-attention with a residual path back
// to the query features.
AttentionOut cross_attention(const Tensor& query_feats,
                             const Tensor& context_feats, const Tensor& wq,
                             const Tensor& wk, const Tensor& wv) {
  const double scale =
      1.0 / std::sqrt(static_cast<double>(query_feats.dim(1)));
  Tensor q = matmul(query_feats, wq);
  Tensor k = matmul(context_feats, wk);
  Tensor v = matmul(context_feats, wv);
  Tensor weights = softmax(scalar_mul(matmul(q, transpose(k)), scale), 1);
  return {add(query_feats, matmul(weights, v)), weights};
}

}  // namespace

EncodeOutput Model::encode_and_fuse(const FeatureStream& stream,
                                    Direction direction) const {
  check_stream(stream);
  const FeatureStream input =
      direction == Direction::backward ? stream.reversed() : stream;
  const auto& p = params_;

  Tensor fa = relu(conv1d(input.audio, p.audio_w, p.audio_b));
  Tensor fv = relu(conv1d(input.visual, p.visual_w, p.visual_b));
  auto av = cross_attention(fa, fv, p.av_q, p.av_k, p.av_v);
  auto va = cross_attention(fv, fa, p.va_q, p.va_k, p.va_v);

  Tensor fused = add(matmul(concat({av.out, va.out}, 1), p.fuse_w), p.fuse_b);
  Tensor probs = sigmoid(add(matmul(fused, p.cls_w), p.cls_b));  // [T x 1]

  EncodeOutput out;
  out.f_cf = concat({fused, probs}, 1);
  out.f_av = av.out;
  out.f_va = va.out;
  out.frame_probs = reshape(probs, {config_.frames});
  out.attn_av = av.weights;
  out.attn_va = va.weights;
  return out;
}

Tensor Model::cpg_head(const Tensor& f_cf) const {
  const auto& p = params_;
  const std::size_t L = config_.durations, T = config_.frames;
  Tensor sampled = bm_collapse(f_cf, mask_, p.cpg_sample_w);  // [L x T x C']
  Tensor hidden = relu(conv2d(sampled, p.cpg_conv_w, p.cpg_conv_b));
  Tensor flat = reshape(hidden, {L * T, config_.cpg_hidden});
  Tensor logits = add(matmul(flat, p.cpg_out_w), p.cpg_out_b);
  return sigmoid(reshape(logits, {L, T}));
}

Tensor Model::fpg_head(const Tensor& f_cf) const {
  const auto& p = params_;
  Tensor e1 = relu(conv1d(f_cf, p.fpg_enc1_w, p.fpg_enc1_b));              // T
  Tensor e2 = relu(conv1d(max_pool1d(e1), p.fpg_enc2_w, p.fpg_enc2_b));    // T/2
  Tensor mid = relu(conv1d(max_pool1d(e2), p.fpg_mid_w, p.fpg_mid_b));     // T/4
  Tensor d2 = relu(conv1d(concat({upsample1d(mid), e2}, 1), p.fpg_dec2_w,
                          p.fpg_dec2_b));                                  // T/2
  Tensor d1 = relu(conv1d(concat({upsample1d(d2), e1}, 1), p.fpg_dec1_w,
                          p.fpg_dec1_b));                                  // T
  return sigmoid(add(matmul(d1, p.fpg_head_w), p.fpg_head_b));
}

ForwardOutput Model::forward_full(const FeatureStream& stream) const {
  ForwardOutput out;
  out.fwd = encode_and_fuse(stream, Direction::forward);
  out.bwd = encode_and_fuse(stream, Direction::backward);
  out.boundary_map = cpg_head(out.fwd.f_cf);
  out.fpg_fwd = fpg_head(out.fwd.f_cf);
  out.fpg_bwd = fpg_head(out.bwd.f_cf);
  return out;
}

void Model::zero_grad() {
  for (auto& nt : params_.named()) nt.tensor.zero_grad();
}

BoundaryMap ForwardOutput::boundary_values() const {
  BoundaryMap m(boundary_map.dim(0), boundary_map.dim(1));
  std::copy(boundary_map.data().begin(), boundary_map.data().end(),
            m.values.begin());
  return m;
}

ProbTriplet triplet_from(const Tensor& fpg_out, Direction direction) {
  const std::size_t T = fpg_out.dim(0);
  ProbTriplet p;
  p.direction = direction;
  p.start.resize(T);
  p.end.resize(T);
  p.content.resize(T);
  const auto& d = fpg_out.data();
  for (std::size_t t = 0; t < T; ++t) {
    p.start[t] = d[t * 3 + 0];
    p.end[t] = d[t * 3 + 1];
    p.content[t] = d[t * 3 + 2];
  }
  return p;
}

ProbTriplet ForwardOutput::triplet(Direction direction) const {
  return direction == Direction::forward
             ? triplet_from(fpg_fwd, Direction::forward)
             : triplet_from(fpg_bwd, Direction::backward);
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const auto named = model.params().named();
  ByteWriter w;
  w.bytes("HBMP");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& nt : named) {
    w.u32(static_cast<std::uint32_t>(nt.name.size()));
    w.bytes(nt.name);
    w.u32(static_cast<std::uint32_t>(nt.tensor.rank()));
    for (auto d : nt.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : nt.tensor.data()) w.f64(v);
  }
  write_file(path, w.buffer().data(), w.buffer().size());
}

void load_checkpoint(const std::filesystem::path& path, Model& model) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, path.string());
  if (r.bytes(4, "magic") != "HBMP") {
    throw ParseError(path.string() + ": bad magic, expected \"HBMP\"", 0);
  }
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw VersionError(path.string() + ": checkpoint version " +
                       std::to_string(version) + " is not supported");
  }
  const auto count = r.u32("tensor count");
  std::vector<std::pair<std::string, std::pair<Shape, std::vector<double>>>>
      table;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name = r.bytes(r.u32("name length"), "name");
    Shape shape(r.u32("rank"));
    for (auto& d : shape) d = r.u32("dimension");
    std::vector<double> values(numel(shape));
    for (auto& v : values) v = r.f64("tensor values");
    table.push_back({name, {std::move(shape), std::move(values)}});
  }
  if (!r.at_end()) {
    throw ParseError(path.string() + ": trailing bytes", r.offset());
  }

  auto named = model.params().named();
  if (table.size() != named.size()) {
    throw ShapeError(path.string() + ": checkpoint holds " +
                     std::to_string(table.size()) + " tensors, model has " +
                     std::to_string(named.size()));
  }
  // Validate everything before touching the model.
  for (std::size_t k = 0; k < named.size(); ++k) {
    const auto& [name, entry] = table[k];
    if (name != named[k].name) {
      throw ShapeError(path.string() + ": tensor " + std::to_string(k) +
                       " is '" + name + "', expected '" + named[k].name + "'");
    }
    if (entry.first != named[k].tensor.shape()) {
      throw ShapeError(path.string() + ": '" + name + "' has shape " +
                       shape_str(entry.first) + ", config expects " +
                       shape_str(named[k].tensor.shape()));
    }
  }
  for (std::size_t k = 0; k < named.size(); ++k) {
    auto dst = named[k].tensor.mutable_data();
    std::copy(table[k].second.second.begin(), table[k].second.second.end(),
              dst.begin());
  }
}

}  // namespace hbm
