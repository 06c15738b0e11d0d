#include "hbm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hbm/kernels.hpp"

namespace hbm::ops {

namespace {

using detail::Node;
namespace kp = kernels::parallel;

[[noreturn]] void fail(std::string_view op, const Shape& a, const Shape& b,
                       std::string_view what) {
  throw ShapeError(std::string(op) + ": " + std::string(what) + " (got " +
                   shape_str(a) + " and " + shape_str(b) + ")");
}

[[noreturn]] void fail(std::string_view op, const Shape& a,
                       std::string_view what) {
  throw ShapeError(std::string(op) + ": " + std::string(what) + " (got " +
                   shape_str(a) + ")");
}

Tensor record(OpKind op, Shape shape, std::vector<double> data,
              const std::vector<Tensor>& inputs,
              std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  const bool track =
      grad_enabled() && std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor& t) {
                                      return t.defined() && t.requires_grad();
                                    });
  if (track) {
    node->requires_grad = true;
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(bw);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of input k, or nullptr when that input needs none.
std::vector<double>* grad_of(Node& self, std::size_t k) {
  if (k >= self.inputs.size() || !self.inputs[k]) return nullptr;
  Node& in = *self.inputs[k];
  if (!in.requires_grad) return nullptr;
  return &in.ensure_grad();
}

const std::vector<double>& data_of(Node& self, std::size_t k) {
  return self.inputs[k]->data;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t dim = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(std::string_view op, const Shape& s, std::size_t axis) {
  if (axis >= s.size()) {
    fail(op, s, "axis " + std::to_string(axis) + " out of range");
  }
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.dim = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out.push_back(s[i]);
  }
  return out;
}

// Returns the repeat period of b inside a (numel(b)).
std::size_t broadcast_period(std::string_view op, const Shape& a,
                             const Shape& b) {
  if (a == b) return numel(b);
  if (b.size() <= a.size() &&
      std::equal(b.begin(), b.end(), a.end() - static_cast<long>(b.size())) &&
      numel(b) > 0) {
    return numel(b);
  }
  fail(op, a, b, "shapes are not broadcast-compatible");
}

template <typename Fwd, typename GradA, typename GradB>
Tensor binary(OpKind kind, const Tensor& a, const Tensor& b, Fwd fwd,
              GradA grad_a, GradB grad_b) {
  const std::size_t period =
      broadcast_period(op_name(kind), a.shape(), b.shape());
  const auto& ad = a.data();
  const auto& bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fwd(ad[i], bd[i % period]);
  }
  return record(kind, a.shape(), std::move(out), {a, b},
                [period, grad_a, grad_b](Node& self) {
                  const auto& av = data_of(self, 0);
                  const auto& bv = data_of(self, 1);
                  const auto& g = self.grad;
                  if (auto* ga = grad_of(self, 0)) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      (*ga)[i] += grad_a(g[i], av[i], bv[i % period]);
                    }
                  }
                  if (auto* gb = grad_of(self, 1)) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      (*gb)[i % period] += grad_b(g[i], av[i], bv[i % period]);
                    }
                  }
                });
}

template <typename Fwd, typename Deriv>
Tensor unary(OpKind kind, const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto& xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xd[i]);
  return record(kind, x.shape(), std::move(out), {x}, [deriv](Node& self) {
    if (auto* gx = grad_of(self, 0)) {
      const auto& xv = data_of(self, 0);
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        (*gx)[i] += self.grad[i] * deriv(xv[i], self.data[i]);
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      OpKind::add, a, b, [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      OpKind::sub, a, b, [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      OpKind::mul, a, b, [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor scalar_mul(const Tensor& a, double s) {
  return unary(
      OpKind::scalar_mul, a, [s](double x) { return s * x; },
      [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      OpKind::add_scalar, a, [s](double x) { return x + s; },
      [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    fail("matmul", a.shape(), b.shape(), "expected [m x k] * [k x n]");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  kp::matmul(a.data(), b.data(), out, m, k, n);
  return record(OpKind::matmul, {m, n}, std::move(out), {a, b},
                [m, k, n](Node& self) {
                  if (auto* ga = grad_of(self, 0)) {
                    kp::matmul_nt(self.grad, data_of(self, 1), *ga, m, n, k);
                  }
                  if (auto* gb = grad_of(self, 1)) {
                    kp::matmul_tn(data_of(self, 0), self.grad, *gb, m, k, n);
                  }
                });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) fail("transpose", a.shape(), "expected a matrix");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  const auto& ad = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = ad[i * c + j];
  }
  return record(OpKind::transpose, {c, r}, std::move(out), {a},
                [r, c](Node& self) {
                  if (auto* ga = grad_of(self, 0)) {
                    for (std::size_t i = 0; i < r; ++i) {
                      for (std::size_t j = 0; j < c; ++j) {
                        (*ga)[i * c + j] += self.grad[j * r + i];
                      }
                    }
                  }
                });
}

namespace {

void add_bias(std::vector<double>& y, std::span<const double> bias) {
  const std::size_t co = bias.size();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bias[i % co];
}

void bias_grad(const std::vector<double>& g, std::vector<double>& gb) {
  const std::size_t co = gb.size();
  for (std::size_t i = 0; i < g.size(); ++i) gb[i % co] += g[i];
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.rank() != 2 || w.rank() != 3 || w.dim(1) != x.dim(1)) {
    fail("conv1d", x.shape(), w.shape(),
         "expected x [T x Ci] and w [K x Ci x Co]");
  }
  if (w.dim(0) % 2 == 0) fail("conv1d", w.shape(), "kernel width must be odd");
  const kernels::Conv1dDims d{x.dim(0), x.dim(1), w.dim(2), w.dim(0)};
  if (bias.defined() && bias.shape() != Shape{d.out_ch}) {
    fail("conv1d", w.shape(), bias.shape(), "bias must be [Co]");
  }
  std::vector<double> out(d.frames * d.out_ch, 0.0);
  kp::conv1d_forward(x.data(), w.data(), out, d);
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) {
    add_bias(out, bias.data());
    inputs.push_back(bias);
  }
  return record(OpKind::conv1d, {d.frames, d.out_ch}, std::move(out), inputs,
                [d](Node& self) {
                  if (auto* gx = grad_of(self, 0)) {
                    kp::conv1d_backward_input(self.grad, data_of(self, 1), *gx,
                                              d);
                  }
                  if (auto* gw = grad_of(self, 1)) {
                    kp::conv1d_backward_weight(self.grad, data_of(self, 0),
                                               *gw, d);
                  }
                  if (auto* gb = grad_of(self, 2)) bias_grad(self.grad, *gb);
                });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.rank() != 3 || w.rank() != 4 || w.dim(2) != x.dim(2)) {
    fail("conv2d", x.shape(), w.shape(),
         "expected x [H x W x Ci] and w [Kh x Kw x Ci x Co]");
  }
  if (w.dim(0) % 2 == 0 || w.dim(1) % 2 == 0) {
    fail("conv2d", w.shape(), "kernel sizes must be odd");
  }
  const kernels::Conv2dDims d{x.dim(0), x.dim(1), x.dim(2),
                              w.dim(3), w.dim(0), w.dim(1)};
  if (bias.defined() && bias.shape() != Shape{d.out_ch}) {
    fail("conv2d", w.shape(), bias.shape(), "bias must be [Co]");
  }
  std::vector<double> out(d.height * d.width * d.out_ch, 0.0);
  kp::conv2d_forward(x.data(), w.data(), out, d);
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) {
    add_bias(out, bias.data());
    inputs.push_back(bias);
  }
  return record(OpKind::conv2d, {d.height, d.width, d.out_ch}, std::move(out),
                inputs, [d](Node& self) {
                  if (auto* gx = grad_of(self, 0)) {
                    kp::conv2d_backward_input(self.grad, data_of(self, 1), *gx,
                                              d);
                  }
                  if (auto* gw = grad_of(self, 1)) {
                    kp::conv2d_backward_weight(self.grad, data_of(self, 0),
                                               *gw, d);
                  }
                  if (auto* gb = grad_of(self, 2)) bias_grad(self.grad, *gb);
                });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      OpKind::sigmoid, x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      OpKind::relu, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) {
      throw std::domain_error("log: non-positive input " + std::to_string(v));
    }
  }
  return unary(
      OpKind::log, x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) {
      throw std::domain_error("sqrt: negative input " + std::to_string(v));
    }
  }
  return unary(
      OpKind::sqrt, x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor pow(const Tensor& x, double p) {
  for (double v : x.data()) {
    if (v < 0.0) {
      throw std::domain_error("pow: negative base " + std::to_string(v));
    }
  }
  return unary(
      OpKind::pow, x, [p](double v) { return std::pow(v, p); },
      [p](double v, double) {
        if (p == 0.0) return 0.0;
        if (v == 0.0) return p == 1.0 ? 1.0 : 0.0;
        return p * std::pow(v, p - 1.0);
      });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      OpKind::clamp, x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_axis("softmax", x.shape(), axis);
  const auto& xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.dim * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t d = 0; d < s.dim; ++d) {
        mx = std::max(mx, xd[base + d * s.inner]);
      }
      double z = 0.0;
      for (std::size_t d = 0; d < s.dim; ++d) {
        const double e = std::exp(xd[base + d * s.inner] - mx);
        out[base + d * s.inner] = e;
        z += e;
      }
      for (std::size_t d = 0; d < s.dim; ++d) out[base + d * s.inner] /= z;
    }
  }
  return record(OpKind::softmax, x.shape(), std::move(out), {x},
                [s](Node& self) {
                  auto* gx = grad_of(self, 0);
                  if (!gx) return;
                  const auto& y = self.data;
                  const auto& g = self.grad;
                  for (std::size_t o = 0; o < s.outer; ++o) {
                    for (std::size_t in = 0; in < s.inner; ++in) {
                      const std::size_t base = o * s.dim * s.inner + in;
                      double dot = 0.0;
                      for (std::size_t d = 0; d < s.dim; ++d) {
                        dot += g[base + d * s.inner] * y[base + d * s.inner];
                      }
                      for (std::size_t d = 0; d < s.dim; ++d) {
                        const std::size_t k = base + d * s.inner;
                        (*gx)[k] += y[k] * (g[k] - dot);
                      }
                    }
                  }
                });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return record(OpKind::sum, {}, {acc}, {x}, [](Node& self) {
    if (auto* gx = grad_of(self, 0)) {
      for (auto& v : *gx) v += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) fail("mean", x.shape(), "empty tensor");
  const double n = static_cast<double>(x.numel());
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return record(OpKind::mean, {}, {acc / n}, {x}, [n](Node& self) {
    if (auto* gx = grad_of(self, 0)) {
      const double g = self.grad[0] / n;
      for (auto& v : *gx) v += g;
    }
  });
}

namespace {

Tensor reduce_axis(OpKind kind, const Tensor& x, std::size_t axis,
                   double scale) {
  const auto s = split_axis(op_name(kind), x.shape(), axis);
  const auto& xd = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t d = 0; d < s.dim; ++d) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        out[o * s.inner + in] += xd[(o * s.dim + d) * s.inner + in];
      }
    }
  }
  for (auto& v : out) v *= scale;
  return record(kind, drop_axis(x.shape(), axis), std::move(out), {x},
                [s, scale](Node& self) {
                  auto* gx = grad_of(self, 0);
                  if (!gx) return;
                  for (std::size_t o = 0; o < s.outer; ++o) {
                    for (std::size_t d = 0; d < s.dim; ++d) {
                      for (std::size_t in = 0; in < s.inner; ++in) {
                        (*gx)[(o * s.dim + d) * s.inner + in] +=
                            scale * self.grad[o * s.inner + in];
                      }
                    }
                  }
                });
}

}  // namespace

Tensor mean(const Tensor& x, std::size_t axis) {
  const auto dim = split_axis("mean", x.shape(), axis).dim;
  if (dim == 0) fail("mean", x.shape(), "reduced axis is empty");
  return reduce_axis(OpKind::mean, x, axis, 1.0 / static_cast<double>(dim));
}

Tensor sum(const Tensor& x, std::size_t axis) {
  return reduce_axis(OpKind::sum, x, axis, 1.0);
}

Tensor max_pool1d(const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) % 2 != 0) {
    fail("max_pool1d", x.shape(), "expected [T x C] with even T");
  }
  const std::size_t half = x.dim(0) / 2, c = x.dim(1);
  const auto& xd = x.data();
  std::vector<double> out(half * c);
  std::vector<std::size_t> arg(half * c);
  for (std::size_t t = 0; t < half; ++t) {
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t a = (2 * t) * c + k, b = (2 * t + 1) * c + k;
      const bool first = xd[a] >= xd[b];
      out[t * c + k] = first ? xd[a] : xd[b];
      arg[t * c + k] = first ? a : b;
    }
  }
  return record(OpKind::max_pool1d, {half, c}, std::move(out), {x},
                [arg = std::move(arg)](Node& self) {
                  if (auto* gx = grad_of(self, 0)) {
                    for (std::size_t i = 0; i < arg.size(); ++i) {
                      (*gx)[arg[i]] += self.grad[i];
                    }
                  }
                });
}

Tensor upsample1d(const Tensor& x) {
  if (x.rank() != 2) fail("upsample1d", x.shape(), "expected [T x C]");
  const std::size_t t_in = x.dim(0), c = x.dim(1);
  const auto& xd = x.data();
  std::vector<double> out(2 * t_in * c);
  for (std::size_t t = 0; t < 2 * t_in; ++t) {
    std::copy_n(xd.begin() + static_cast<long>((t / 2) * c), c,
                out.begin() + static_cast<long>(t * c));
  }
  return record(OpKind::upsample1d, {2 * t_in, c}, std::move(out), {x},
                [t_in, c](Node& self) {
                  if (auto* gx = grad_of(self, 0)) {
                    for (std::size_t t = 0; t < 2 * t_in; ++t) {
                      for (std::size_t k = 0; k < c; ++k) {
                        (*gx)[(t / 2) * c + k] += self.grad[t * c + k];
                      }
                    }
                  }
                });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const auto s0 = split_axis("concat", first, axis);
  std::vector<std::size_t> dims;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    bool ok = ps.size() == first.size();
    for (std::size_t i = 0; ok && i < ps.size(); ++i) {
      if (i != axis && ps[i] != first[i]) ok = false;
    }
    if (!ok) fail("concat", first, ps, "mismatch off the concat axis");
    dims.push_back(ps[axis]);
    total += ps[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  std::vector<double> out(s0.outer * total * s0.inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& pd = parts[p].data();
    const std::size_t block = dims[p] * s0.inner;
    for (std::size_t o = 0; o < s0.outer; ++o) {
      std::copy_n(pd.begin() + static_cast<long>(o * block), block,
                  out.begin() + static_cast<long>(o * total * s0.inner +
                                                  offset * s0.inner));
    }
    offset += dims[p];
  }
  const std::size_t outer = s0.outer, inner = s0.inner;
  return record(OpKind::concat, std::move(out_shape), std::move(out), parts,
                [dims, total, outer, inner](Node& self) {
                  std::size_t off = 0;
                  for (std::size_t p = 0; p < dims.size(); ++p) {
                    const std::size_t block = dims[p] * inner;
                    if (auto* gp = grad_of(self, p)) {
                      for (std::size_t o = 0; o < outer; ++o) {
                        const std::size_t src = o * total * inner + off * inner;
                        for (std::size_t e = 0; e < block; ++e) {
                          (*gp)[o * block + e] += self.grad[src + e];
                        }
                      }
                    }
                    off += dims[p];
                  }
                });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  const auto s = split_axis("slice", x.shape(), axis);
  if (begin > end || end > s.dim) {
    fail("slice", x.shape(),
         "range [" + std::to_string(begin) + ", " + std::to_string(end) +
             ") out of bounds on axis " + std::to_string(axis));
  }
  const std::size_t len = end - begin;
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  const auto& xd = x.data();
  std::vector<double> out(s.outer * len * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xd.begin() + static_cast<long>((o * s.dim + begin) * s.inner),
                len * s.inner,
                out.begin() + static_cast<long>(o * len * s.inner));
  }
  return record(OpKind::slice, std::move(out_shape), std::move(out), {x},
                [s, begin, len](Node& self) {
                  if (auto* gx = grad_of(self, 0)) {
                    for (std::size_t o = 0; o < s.outer; ++o) {
                      for (std::size_t e = 0; e < len * s.inner; ++e) {
                        (*gx)[(o * s.dim + begin) * s.inner + e] +=
                            self.grad[o * len * s.inner + e];
                      }
                    }
                  }
                });
}

Tensor flip(const Tensor& x, std::size_t axis) {
  const auto s = split_axis("flip", x.shape(), axis);
  const auto& xd = x.data();
  std::vector<double> out(xd.size());
  auto index = [s](std::size_t o, std::size_t d, std::size_t in) {
    return (o * s.dim + d) * s.inner + in;
  };
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t d = 0; d < s.dim; ++d) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        out[index(o, d, in)] = xd[index(o, s.dim - 1 - d, in)];
      }
    }
  }
  return record(OpKind::flip, x.shape(), std::move(out), {x},
                [s, index](Node& self) {
                  if (auto* gx = grad_of(self, 0)) {
                    for (std::size_t o = 0; o < s.outer; ++o) {
                      for (std::size_t d = 0; d < s.dim; ++d) {
                        for (std::size_t in = 0; in < s.inner; ++in) {
                          (*gx)[index(o, s.dim - 1 - d, in)] +=
                              self.grad[index(o, d, in)];
                        }
                      }
                    }
                  }
                });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    fail("reshape", x.shape(), shape, "element count differs");
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return record(OpKind::reshape, std::move(shape), std::move(out), {x},
                [](Node& self) {
                  if (auto* gx = grad_of(self, 0)) {
                    for (std::size_t i = 0; i < self.grad.size(); ++i) {
                      (*gx)[i] += self.grad[i];
                    }
                  }
                });
}

Tensor weighted_sum(const Tensor& x, const Tensor& w, std::size_t axis) {
  const auto s = split_axis("weighted_sum", x.shape(), axis);
  if (w.shape() != Shape{s.dim}) {
    fail("weighted_sum", x.shape(), w.shape(),
         "weights must be a vector over the reduced axis");
  }
  const auto& xd = x.data();
  const auto& wd = w.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t d = 0; d < s.dim; ++d) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        out[o * s.inner + in] += wd[d] * xd[(o * s.dim + d) * s.inner + in];
      }
    }
  }
  return record(
      OpKind::weighted_sum, drop_axis(x.shape(), axis), std::move(out), {x, w},
      [s](Node& self) {
        const auto& xv = data_of(self, 0);
        const auto& wv = data_of(self, 1);
        auto* gx = grad_of(self, 0);
        auto* gw = grad_of(self, 1);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t d = 0; d < s.dim; ++d) {
            for (std::size_t in = 0; in < s.inner; ++in) {
              const std::size_t k = (o * s.dim + d) * s.inner + in;
              const double g = self.grad[o * s.inner + in];
              if (gx) (*gx)[k] += g * wv[d];
              if (gw) (*gw)[d] += g * xv[k];
            }
          }
        }
      });
}

Tensor bm_sample(const Tensor& features, const BMSamplingMask& mask) {
  if (features.rank() != 2 || features.dim(0) != mask.frames()) {
    fail("bm_sample", features.shape(),
         Shape{mask.samples(), mask.durations(), mask.frames()},
         "features must be [T x C] with T matching the mask");
  }
  const std::size_t T = mask.frames(), L = mask.durations(),
                    N = mask.samples(), C = features.dim(1);
  const auto& f = features.data();
  std::vector<double> out(N * L * T * C, 0.0);
  auto cell = [L, T, C](std::size_t n, std::size_t i, std::size_t j) {
    return ((n * L + i) * T + j) * C;
  };
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < T; ++j) {
        if (!mask.in_range(i, j)) continue;
        const auto& tp = mask.tap(i, j, n);
        for (std::size_t c = 0; c < C; ++c) {
          out[cell(n, i, j) + c] =
              tp.w_lo * f[tp.lo * C + c] + tp.w_hi * f[tp.hi * C + c];
        }
      }
    }
  }
  return record(OpKind::bm_sample, {N, L, T, C}, std::move(out), {features},
                [&mask, N, L, T, C, cell](Node& self) {
                  auto* gf = grad_of(self, 0);
                  if (!gf) return;
                  for (std::size_t n = 0; n < N; ++n) {
                    for (std::size_t i = 0; i < L; ++i) {
                      for (std::size_t j = 0; j < T; ++j) {
                        if (!mask.in_range(i, j)) continue;
                        const auto& tp = mask.tap(i, j, n);
                        for (std::size_t c = 0; c < C; ++c) {
                          const double g = self.grad[cell(n, i, j) + c];
                          (*gf)[tp.lo * C + c] += g * tp.w_lo;
                          (*gf)[tp.hi * C + c] += g * tp.w_hi;
                        }
                      }
                    }
                  }
                });
}

Tensor bm_collapse(const Tensor& features, const BMSamplingMask& mask,
                   const Tensor& sample_w) {
  if (features.rank() != 2 || features.dim(0) != mask.frames()) {
    fail("bm_collapse", features.shape(),
         Shape{mask.samples(), mask.durations(), mask.frames()},
         "features must be [T x C] with T matching the mask");
  }
  if (sample_w.shape() != Shape{mask.samples()}) {
    fail("bm_collapse", sample_w.shape(), Shape{mask.samples()},
         "sample weights must be [N]");
  }
  const std::size_t C = features.dim(1);
  std::vector<double> out(mask.durations() * mask.frames() * C, 0.0);
  kp::bm_collapse_forward(features.data(), mask, sample_w.data(), out, C);
  return record(OpKind::bm_collapse, {mask.durations(), mask.frames(), C},
                std::move(out), {features, sample_w}, [&mask, C](Node& self) {
                  if (auto* gf = grad_of(self, 0)) {
                    kp::bm_collapse_backward_features(
                        self.grad, mask, data_of(self, 1), *gf, C);
                  }
                  if (auto* gw = grad_of(self, 1)) {
                    kp::bm_collapse_backward_weights(
                        self.grad, mask, data_of(self, 0), *gw, C);
                  }
                });
}

}  // namespace hbm::ops
