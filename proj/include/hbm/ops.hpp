#pragma once

#include <cstddef>
#include <vector>

#include "hbm/bm_mask.hpp"
#include "hbm/tensor.hpp"

// Differentiable tensor operations. Every op records itself on the graph
// when grad mode is on and at least one input requires a gradient.
namespace hbm::ops {

// Elementwise. `b` may match `a` exactly or match a's trailing dimensions,
// in which case it is repeated over the leading ones (bias broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scalar_mul(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

// [m x k] * [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x [T x Ci], w [K x Ci x Co], optional bias [Co]; zero "same" padding.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias = {});
// x [H x W x Ci], w [Kh x Kw x Ci x Co], optional bias [Co].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias = {});

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
// Throws std::domain_error on non-positive input.
Tensor log(const Tensor& x);
// Gradient at exactly 0 is taken as 0. Throws on negative input.
Tensor sqrt(const Tensor& x);
// x^p for x >= 0.
Tensor pow(const Tensor& x, double p);
// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor softmax(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis);
Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis);

// Over axis 0 of [T x C]: width 2 stride 2; ties go to the lower index.
Tensor max_pool1d(const Tensor& x);
// Nearest neighbour, factor 2, over axis 0 of [T x C].
Tensor upsample1d(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end);
Tensor flip(const Tensor& x, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);

// Contracts `axis` of x against the vector w.
Tensor weighted_sum(const Tensor& x, const Tensor& w, std::size_t axis);

// Boundary-matching feature map M_F [N x L x T x C] from features [T x C].
Tensor bm_sample(const Tensor& features, const BMSamplingMask& mask);
// weighted_sum(bm_sample(features, mask), sample_w, 0) without materialising
// M_F: [L x T x C].
Tensor bm_collapse(const Tensor& features, const BMSamplingMask& mask,
                   const Tensor& sample_w);

}  // namespace hbm::ops
