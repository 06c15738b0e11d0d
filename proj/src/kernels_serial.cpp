#include "hbm/kernels.hpp"

namespace hbm::kernels::serial {

void matmul(In a, In b, Out c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] += acc;
    }
  }
}

void matmul_nt(In a, In b, Out c, std::size_t m, std::size_t n,
               std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < n; ++p) acc += a[i * n + p] * b[j * n + p];
      c[i * k + j] += acc;
    }
  }
}

void matmul_tn(In a, In b, Out c, std::size_t m, std::size_t k,
               std::size_t n) {
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += a[i * k + r] * b[i * n + j];
      c[r * n + j] += acc;
    }
  }
}

void conv1d_forward(In x, In w, Out y, const Conv1dDims& d) {
  const auto pad = static_cast<long>(d.kernel / 2);
  const auto frames = static_cast<long>(d.frames);
  for (long t = 0; t < frames; ++t) {
    for (std::size_t co = 0; co < d.out_ch; ++co) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d.kernel; ++k) {
        const long src = t + static_cast<long>(k) - pad;
        if (src < 0 || src >= frames) continue;
        for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
          acc += x[src * d.in_ch + ci] * w[(k * d.in_ch + ci) * d.out_ch + co];
        }
      }
      y[t * d.out_ch + co] += acc;
    }
  }
}

void conv1d_backward_input(In dy, In w, Out dx, const Conv1dDims& d) {
  const auto pad = static_cast<long>(d.kernel / 2);
  const auto frames = static_cast<long>(d.frames);
  for (long t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < d.kernel; ++k) {
      const long src = t + static_cast<long>(k) - pad;
      if (src < 0 || src >= frames) continue;
      for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
        for (std::size_t co = 0; co < d.out_ch; ++co) {
          dx[src * d.in_ch + ci] +=
              dy[t * d.out_ch + co] * w[(k * d.in_ch + ci) * d.out_ch + co];
        }
      }
    }
  }
}

void conv1d_backward_weight(In dy, In x, Out dw, const Conv1dDims& d) {
  const auto pad = static_cast<long>(d.kernel / 2);
  const auto frames = static_cast<long>(d.frames);
  for (long t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < d.kernel; ++k) {
      const long src = t + static_cast<long>(k) - pad;
      if (src < 0 || src >= frames) continue;
      for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
        for (std::size_t co = 0; co < d.out_ch; ++co) {
          dw[(k * d.in_ch + ci) * d.out_ch + co] +=
              x[src * d.in_ch + ci] * dy[t * d.out_ch + co];
        }
      }
    }
  }
}

namespace {

template <typename Fn>
void for_each_tap2d(const Conv2dDims& d, Fn&& fn) {
  const auto ph = static_cast<long>(d.kernel_h / 2);
  const auto pw = static_cast<long>(d.kernel_w / 2);
  const auto H = static_cast<long>(d.height);
  const auto W = static_cast<long>(d.width);
  for (long h = 0; h < H; ++h) {
    for (long x = 0; x < W; ++x) {
      for (std::size_t kh = 0; kh < d.kernel_h; ++kh) {
        const long sh = h + static_cast<long>(kh) - ph;
        if (sh < 0 || sh >= H) continue;
        for (std::size_t kw = 0; kw < d.kernel_w; ++kw) {
          const long sw = x + static_cast<long>(kw) - pw;
          if (sw < 0 || sw >= W) continue;
          fn(static_cast<std::size_t>(h * W + x),
             static_cast<std::size_t>(sh * W + sw), kh * d.kernel_w + kw);
        }
      }
    }
  }
}

}  // namespace

void conv2d_forward(In x, In w, Out y, const Conv2dDims& d) {
  for_each_tap2d(d, [&](std::size_t out, std::size_t src, std::size_t tap) {
    for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
      for (std::size_t co = 0; co < d.out_ch; ++co) {
        y[out * d.out_ch + co] +=
            x[src * d.in_ch + ci] * w[(tap * d.in_ch + ci) * d.out_ch + co];
      }
    }
  });
}

void conv2d_backward_input(In dy, In w, Out dx, const Conv2dDims& d) {
  for_each_tap2d(d, [&](std::size_t out, std::size_t src, std::size_t tap) {
    for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
      for (std::size_t co = 0; co < d.out_ch; ++co) {
        dx[src * d.in_ch + ci] +=
            dy[out * d.out_ch + co] * w[(tap * d.in_ch + ci) * d.out_ch + co];
      }
    }
  });
}

void conv2d_backward_weight(In dy, In x, Out dw, const Conv2dDims& d) {
  for_each_tap2d(d, [&](std::size_t out, std::size_t src, std::size_t tap) {
    for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
      for (std::size_t co = 0; co < d.out_ch; ++co) {
        dw[(tap * d.in_ch + ci) * d.out_ch + co] +=
            x[src * d.in_ch + ci] * dy[out * d.out_ch + co];
      }
    }
  });
}

void bm_collapse_forward(In f, const BMSamplingMask& mask, In sample_w,
                         Out out, std::size_t channels) {
  for (std::size_t i = 0; i < mask.durations(); ++i) {
    for (std::size_t j = 0; j < mask.frames(); ++j) {
      if (!mask.in_range(i, j)) continue;
      for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t n = 0; n < mask.samples(); ++n) {
          const auto& tp = mask.tap(i, j, n);
          acc += sample_w[n] * (tp.w_lo * f[tp.lo * channels + c] +
                                tp.w_hi * f[tp.hi * channels + c]);
        }
        out[(i * mask.frames() + j) * channels + c] += acc;
      }
    }
  }
}

void bm_collapse_backward_features(In dout, const BMSamplingMask& mask,
                                   In sample_w, Out df,
                                   std::size_t channels) {
  for (std::size_t i = 0; i < mask.durations(); ++i) {
    for (std::size_t j = 0; j < mask.frames(); ++j) {
      if (!mask.in_range(i, j)) continue;
      for (std::size_t n = 0; n < mask.samples(); ++n) {
        const auto& tp = mask.tap(i, j, n);
        for (std::size_t c = 0; c < channels; ++c) {
          const double g =
              dout[(i * mask.frames() + j) * channels + c] * sample_w[n];
          df[tp.lo * channels + c] += g * tp.w_lo;
          df[tp.hi * channels + c] += g * tp.w_hi;
        }
      }
    }
  }
}

void bm_collapse_backward_weights(In dout, const BMSamplingMask& mask, In f,
                                  Out dsample_w, std::size_t channels) {
  for (std::size_t n = 0; n < mask.samples(); ++n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < mask.durations(); ++i) {
      for (std::size_t j = 0; j < mask.frames(); ++j) {
        if (!mask.in_range(i, j)) continue;
        const auto& tp = mask.tap(i, j, n);
        for (std::size_t c = 0; c < channels; ++c) {
          acc += dout[(i * mask.frames() + j) * channels + c] *
                 (tp.w_lo * f[tp.lo * channels + c] +
                  tp.w_hi * f[tp.hi * channels + c]);
        }
      }
    }
    dsample_w[n] += acc;
  }
}

}  // namespace hbm::kernels::serial
