#include <omp.h>

#include <algorithm>
#include <vector>

#include "hbm/kernels.hpp"

namespace hbm::kernels::parallel {

namespace {

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kMinParallelWork = 1 << 15;

bool worth_it(std::size_t work) { return work >= kMinParallelWork; }

}  // namespace

void matmul(In a, In b, Out c, std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (worth_it(m * k * n))
  for (long i = 0; i < rows; ++i) {
    double* crow = c.data() + i * n;
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(In a, In b, Out c, std::size_t m, std::size_t n,
               std::size_t k) {
  const auto rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (worth_it(m * k * n))
  for (long i = 0; i < rows; ++i) {
    const double* arow = a.data() + i * n;
    double* crow = c.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      const double* brow = b.data() + j * n;
      double acc = 0.0;
      for (std::size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void matmul_tn(In a, In b, Out c, std::size_t m, std::size_t k,
               std::size_t n) {
  const auto rows = static_cast<long>(k);
#pragma omp parallel for schedule(static) if (worth_it(m * k * n))
  for (long r = 0; r < rows; ++r) {
    double* crow = c.data() + r * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + r];
      const double* brow = b.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void conv1d_forward(In x, In w, Out y, const Conv1dDims& d) {
  const auto pad = static_cast<long>(d.kernel / 2);
  const auto frames = static_cast<long>(d.frames);
#pragma omp parallel for schedule(static) \
    if (worth_it(d.frames * d.kernel * d.in_ch * d.out_ch))
  for (long t = 0; t < frames; ++t) {
    double* yrow = y.data() + t * d.out_ch;
    for (std::size_t k = 0; k < d.kernel; ++k) {
      const long src = t + static_cast<long>(k) - pad;
      if (src < 0 || src >= frames) continue;
      for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
        const double xv = x[src * d.in_ch + ci];
        const double* wrow = w.data() + (k * d.in_ch + ci) * d.out_ch;
        for (std::size_t co = 0; co < d.out_ch; ++co) yrow[co] += xv * wrow[co];
      }
    }
  }
}

void conv1d_backward_input(In dy, In w, Out dx, const Conv1dDims& d) {
  const auto pad = static_cast<long>(d.kernel / 2);
  const auto frames = static_cast<long>(d.frames);
  // Gather form: input row s receives from output rows t = s - k + pad.
#pragma omp parallel for schedule(static) \
    if (worth_it(d.frames * d.kernel * d.in_ch * d.out_ch))
  for (long s = 0; s < frames; ++s) {
    double* dxrow = dx.data() + s * d.in_ch;
    for (std::size_t kk = d.kernel; kk-- > 0;) {
      const long t = s - static_cast<long>(kk) + pad;
      if (t < 0 || t >= frames) continue;
      const double* dyrow = dy.data() + t * d.out_ch;
      for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
        const double* wrow = w.data() + (kk * d.in_ch + ci) * d.out_ch;
        for (std::size_t co = 0; co < d.out_ch; ++co) {
          dxrow[ci] += dyrow[co] * wrow[co];
        }
      }
    }
  }
}

void conv1d_backward_weight(In dy, In x, Out dw, const Conv1dDims& d) {
  const auto pad = static_cast<long>(d.kernel / 2);
  const auto frames = static_cast<long>(d.frames);
  const auto rows = static_cast<long>(d.kernel * d.in_ch);
#pragma omp parallel for schedule(static) \
    if (worth_it(d.frames * d.kernel * d.in_ch * d.out_ch))
  for (long row = 0; row < rows; ++row) {
    const long k = row / static_cast<long>(d.in_ch);
    const std::size_t ci = static_cast<std::size_t>(row) % d.in_ch;
    double* dwrow = dw.data() + row * d.out_ch;
    for (long t = 0; t < frames; ++t) {
      const long src = t + k - pad;
      if (src < 0 || src >= frames) continue;
      const double xv = x[src * d.in_ch + ci];
      const double* dyrow = dy.data() + t * d.out_ch;
      for (std::size_t co = 0; co < d.out_ch; ++co) dwrow[co] += xv * dyrow[co];
    }
  }
}

void conv2d_forward(In x, In w, Out y, const Conv2dDims& d) {
  const auto ph = static_cast<long>(d.kernel_h / 2);
  const auto pw = static_cast<long>(d.kernel_w / 2);
  const auto H = static_cast<long>(d.height);
  const auto W = static_cast<long>(d.width);
  // Channel-major copy of x so the innermost loop runs along a row of pixels.
  // Each output element still receives its terms in (kh, kw, ci) order.
  std::vector<double> xt(d.in_ch * d.height * d.width);
  for (std::size_t p = 0; p < d.height * d.width; ++p) {
    for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
      xt[ci * d.height * d.width + p] = x[p * d.in_ch + ci];
    }
  }
#pragma omp parallel for schedule(static) \
    if (worth_it(d.height * d.width * d.kernel_h * d.kernel_w * d.in_ch * d.out_ch))
  for (long h = 0; h < H; ++h) {
    std::vector<double> acc(d.out_ch * d.width);
    double* yrows = y.data() + h * W * d.out_ch;
    for (long c = 0; c < W; ++c) {
      for (std::size_t co = 0; co < d.out_ch; ++co) {
        acc[co * W + c] = yrows[c * d.out_ch + co];
      }
    }
    for (std::size_t kh = 0; kh < d.kernel_h; ++kh) {
      const long sh = h + static_cast<long>(kh) - ph;
      if (sh < 0 || sh >= H) continue;
      for (std::size_t kw = 0; kw < d.kernel_w; ++kw) {
        const long shift = static_cast<long>(kw) - pw;
        const long c0 = std::max(0L, -shift);
        const long c1 = std::min(W, W - shift);
        const double* wbase =
            w.data() + (kh * d.kernel_w + kw) * d.in_ch * d.out_ch;
        for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
          const double* __restrict xrow =
              xt.data() + (ci * d.height + sh) * d.width;
          for (std::size_t co = 0; co < d.out_ch; ++co) {
            const double wv = wbase[ci * d.out_ch + co];
            double* __restrict a = acc.data() + co * W;
            for (long c = c0; c < c1; ++c) a[c] += wv * xrow[c + shift];
          }
        }
      }
    }
    for (long c = 0; c < W; ++c) {
      for (std::size_t co = 0; co < d.out_ch; ++co) {
        yrows[c * d.out_ch + co] = acc[co * W + c];
      }
    }
  }
}

void conv2d_backward_input(In dy, In w, Out dx, const Conv2dDims& d) {
  const auto ph = static_cast<long>(d.kernel_h / 2);
  const auto pw = static_cast<long>(d.kernel_w / 2);
  const auto H = static_cast<long>(d.height);
  const auto W = static_cast<long>(d.width);
  // wt[tap][co][ci]: each dx element still sees its terms tap by tap, co
  // ascending, but the inner loop now runs contiguously over ci.
  const std::size_t taps = d.kernel_h * d.kernel_w;
  std::vector<double> wt(taps * d.in_ch * d.out_ch);
  for (std::size_t tap = 0; tap < taps; ++tap) {
    for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
      for (std::size_t co = 0; co < d.out_ch; ++co) {
        wt[(tap * d.out_ch + co) * d.in_ch + ci] =
            w[(tap * d.in_ch + ci) * d.out_ch + co];
      }
    }
  }
#pragma omp parallel for schedule(static) \
    if (worth_it(d.height * d.width * d.kernel_h * d.kernel_w * d.in_ch * d.out_ch))
  for (long sh = 0; sh < H; ++sh) {
    for (long sw = 0; sw < W; ++sw) {
      double* __restrict dxrow = dx.data() + (sh * W + sw) * d.in_ch;
      for (std::size_t kh = d.kernel_h; kh-- > 0;) {
        const long h = sh - static_cast<long>(kh) + ph;
        if (h < 0 || h >= H) continue;
        for (std::size_t kw = d.kernel_w; kw-- > 0;) {
          const long c = sw - static_cast<long>(kw) + pw;
          if (c < 0 || c >= W) continue;
          const double* dyrow = dy.data() + (h * W + c) * d.out_ch;
          const double* wbase =
              wt.data() + (kh * d.kernel_w + kw) * d.in_ch * d.out_ch;
          for (std::size_t co = 0; co < d.out_ch; ++co) {
            const double g = dyrow[co];
            const double* __restrict wrow = wbase + co * d.in_ch;
            for (std::size_t ci = 0; ci < d.in_ch; ++ci) dxrow[ci] += g * wrow[ci];
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(In dy, In x, Out dw, const Conv2dDims& d) {
  const auto ph = static_cast<long>(d.kernel_h / 2);
  const auto pw = static_cast<long>(d.kernel_w / 2);
  const auto H = static_cast<long>(d.height);
  const auto W = static_cast<long>(d.width);
  const auto taps = static_cast<long>(d.kernel_h * d.kernel_w);
#pragma omp parallel for schedule(static) \
    if (worth_it(d.height * d.width * d.kernel_h * d.kernel_w * d.in_ch * d.out_ch))
  for (long tap = 0; tap < taps; ++tap) {
    const long kh = tap / static_cast<long>(d.kernel_w);
    const long kw = tap % static_cast<long>(d.kernel_w);
    double* dwbase = dw.data() + tap * d.in_ch * d.out_ch;
    for (long h = 0; h < H; ++h) {
      const long sh = h + kh - ph;
      if (sh < 0 || sh >= H) continue;
      for (long c = 0; c < W; ++c) {
        const long sw = c + kw - pw;
        if (sw < 0 || sw >= W) continue;
        const double* xrow = x.data() + (sh * W + sw) * d.in_ch;
        const double* dyrow = dy.data() + (h * W + c) * d.out_ch;
        for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
          const double xv = xrow[ci];
          double* dwrow = dwbase + ci * d.out_ch;
          for (std::size_t co = 0; co < d.out_ch; ++co) {
            dwrow[co] += xv * dyrow[co];
          }
        }
      }
    }
  }
}

void bm_collapse_forward(In f, const BMSamplingMask& mask, In sample_w,
                         Out out, std::size_t channels) {
  const auto L = static_cast<long>(mask.durations());
  const std::size_t T = mask.frames();
  const std::size_t N = mask.samples();
#pragma omp parallel for schedule(dynamic, 1) \
    if (worth_it(mask.durations() * T * N * channels))
  for (long i = 0; i < L; ++i) {
    std::vector<double> acc(channels);
    for (std::size_t j = 0; j < T; ++j) {
      if (!mask.in_range(i, j)) continue;
      double* orow = out.data() + (i * T + j) * channels;
      std::fill(acc.begin(), acc.end(), 0.0);
      double* __restrict a = acc.data();
      for (std::size_t n = 0; n < N; ++n) {
        const auto& tp = mask.tap(i, j, n);
        const double sw = sample_w[n];
        const double* lo = f.data() + tp.lo * channels;
        const double* hi = f.data() + tp.hi * channels;
        for (std::size_t c = 0; c < channels; ++c) {
          a[c] += sw * (tp.w_lo * lo[c] + tp.w_hi * hi[c]);
        }
      }
      for (std::size_t c = 0; c < channels; ++c) orow[c] += a[c];
    }
  }
}

void bm_collapse_backward_features(In dout, const BMSamplingMask& mask,
                                   In sample_w, Out df,
                                   std::size_t channels) {
  const std::size_t T = mask.frames();
  const std::size_t N = mask.samples();
  // Scatter target rows collide across proposals, so threads own disjoint
  // channel ranges and each walks every proposal in the same order.
#pragma omp parallel if (worth_it(mask.durations() * T * N * channels))
  {
    const auto nthreads = static_cast<std::size_t>(omp_get_num_threads());
    const auto tid = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t c0 = channels * tid / nthreads;
    const std::size_t c1 = channels * (tid + 1) / nthreads;
    for (std::size_t i = 0; i < mask.durations(); ++i) {
      for (std::size_t j = 0; j < T; ++j) {
        if (!mask.in_range(i, j)) continue;
        const double* grow = dout.data() + (i * T + j) * channels;
        for (std::size_t n = 0; n < N; ++n) {
          const auto& tp = mask.tap(i, j, n);
          double* lo = df.data() + tp.lo * channels;
          double* hi = df.data() + tp.hi * channels;
          for (std::size_t c = c0; c < c1; ++c) {
            const double g = grow[c] * sample_w[n];
            lo[c] += g * tp.w_lo;
            hi[c] += g * tp.w_hi;
          }
        }
      }
    }
  }
}

void bm_collapse_backward_weights(In dout, const BMSamplingMask& mask, In f,
                                  Out dsample_w, std::size_t channels) {
  const std::size_t T = mask.frames();
  const auto N = static_cast<long>(mask.samples());
#pragma omp parallel for schedule(static) \
    if (worth_it(mask.durations() * T * mask.samples() * channels))
  for (long n = 0; n < N; ++n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < mask.durations(); ++i) {
      for (std::size_t j = 0; j < T; ++j) {
        if (!mask.in_range(i, j)) continue;
        const auto& tp = mask.tap(i, j, n);
        const double* grow = dout.data() + (i * T + j) * channels;
        const double* lo = f.data() + tp.lo * channels;
        const double* hi = f.data() + tp.hi * channels;
        for (std::size_t c = 0; c < channels; ++c) {
          acc += grow[c] * (tp.w_lo * lo[c] + tp.w_hi * hi[c]);
        }
      }
    }
    dsample_w[n] += acc;
  }
}

}  // namespace hbm::kernels::parallel
