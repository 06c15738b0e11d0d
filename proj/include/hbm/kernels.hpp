#pragma once

// Dense compute kernels behind the heavy autodiff ops. Every kernel
// accumulates into its output (callers zero it first when they want an
// overwrite). `serial` holds straightforward reference loops kept for
// testing; `parallel` holds the OpenMP versions used by the library.
//
// Parallel kernels split work only over disjoint outputs (rows, or channel
// ranges for the BM scatter) and add each output's terms in the same order as
// the serial loops, so results are bit-identical for any thread count.

#include <cstddef>
#include <span>

#include "hbm/bm_mask.hpp"

namespace hbm::kernels {

using In = std::span<const double>;
using Out = std::span<double>;

struct Conv1dDims {
  std::size_t frames;
  std::size_t in_ch;
  std::size_t out_ch;
  std::size_t kernel;  // odd; zero "same" padding
};

struct Conv2dDims {
  std::size_t height;
  std::size_t width;
  std::size_t in_ch;
  std::size_t out_ch;
  std::size_t kernel_h;  // odd
  std::size_t kernel_w;  // odd
};

#define HBM_KERNEL_DECLS                                                      \
  /* c[m x n] += a[m x k] * b[k x n] */                                       \
  void matmul(In a, In b, Out c, std::size_t m, std::size_t k,                \
              std::size_t n);                                                 \
  /* c[m x k] += a[m x n] * b^T, b is [k x n] */                              \
  void matmul_nt(In a, In b, Out c, std::size_t m, std::size_t n,             \
                 std::size_t k);                                              \
  /* c[k x n] += a^T * b, a is [m x k], b is [m x n] */                       \
  void matmul_tn(In a, In b, Out c, std::size_t m, std::size_t k,             \
                 std::size_t n);                                              \
  /* x [T x Ci], w [K x Ci x Co], y [T x Co] */                               \
  void conv1d_forward(In x, In w, Out y, const Conv1dDims& d);                \
  void conv1d_backward_input(In dy, In w, Out dx, const Conv1dDims& d);       \
  void conv1d_backward_weight(In dy, In x, Out dw, const Conv1dDims& d);      \
  /* x [H x W x Ci], w [Kh x Kw x Ci x Co], y [H x W x Co] */                 \
  void conv2d_forward(In x, In w, Out y, const Conv2dDims& d);                \
  void conv2d_backward_input(In dy, In w, Out dx, const Conv2dDims& d);       \
  void conv2d_backward_weight(In dy, In x, Out dw, const Conv2dDims& d);      \
  /* f [T x C], sample_w [N], out [L x T x C] */                              \
  void bm_collapse_forward(In f, const BMSamplingMask& mask, In sample_w,     \
                           Out out, std::size_t channels);                    \
  void bm_collapse_backward_features(In dout, const BMSamplingMask& mask,     \
                                     In sample_w, Out df,                     \
                                     std::size_t channels);                   \
  void bm_collapse_backward_weights(In dout, const BMSamplingMask& mask,      \
                                    In f, Out dsample_w, std::size_t channels);

namespace serial {
HBM_KERNEL_DECLS
}  // namespace serial

namespace parallel {
HBM_KERNEL_DECLS
}  // namespace parallel

#undef HBM_KERNEL_DECLS

}  // namespace hbm::kernels
