#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "proca/tensor.hpp"

namespace proca {

/// Precomputed taps for separable bilinear resampling (half-pixel-center
/// convention). src = (dst + 0.5) * in/out - 0.5, clamped to the image.
struct ResizePlan {
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  std::vector<int> y0, y1, x0, x1;
  std::vector<double> wy, wx;  // weight of the (y1 | x1) tap

  bool identity() const { return in_h == out_h && in_w == out_w; }
};

inline void plan_axis(int in, int out, std::vector<int>& i0, std::vector<int>& i1,
                      std::vector<double>& frac) {
  i0.resize(out);
  i1.resize(out);
  frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double s = (d + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(s));
    i0[d] = lo;
    i1[d] = std::min(lo + 1, in - 1);
    frac[d] = s - lo;
  }
}

inline ResizePlan make_resize_plan(int in_h, int in_w, int out_h, int out_w) {
  ResizePlan p;
  p.in_h = in_h;
  p.in_w = in_w;
  p.out_h = out_h;
  p.out_w = out_w;
  plan_axis(in_h, out_h, p.y0, p.y1, p.wy);
  plan_axis(in_w, out_w, p.x0, p.x1, p.wx);
  return p;
}

/// Bilinear resize of every image in the batch. A same-size plan copies the
/// input verbatim so scale 1.0 is bit-exact.
template <typename T>
Tensor4<T> bilinear_resize(const Tensor4<T>& src, const ResizePlan& p) {
  if (p.identity()) return src;
  Tensor4<T> out(src.n, src.c, p.out_h, p.out_w);
  for (int in = 0; in < src.n; ++in) {
    for (int y = 0; y < p.out_h; ++y) {
      const T fy = static_cast<T>(p.wy[y]);
      for (int x = 0; x < p.out_w; ++x) {
        const T fx = static_cast<T>(p.wx[x]);
        const auto c00 = src.data.col(src.col_index(in, p.y0[y], p.x0[x]));
        const auto c01 = src.data.col(src.col_index(in, p.y0[y], p.x1[x]));
        const auto c10 = src.data.col(src.col_index(in, p.y1[y], p.x0[x]));
        const auto c11 = src.data.col(src.col_index(in, p.y1[y], p.x1[x]));
        out.data.col(out.col_index(in, y, x)) =
            (c00 * (T(1) - fx) + c01 * fx) * (T(1) - fy) + (c10 * (T(1) - fx) + c11 * fx) * fy;
      }
    }
  }
  return out;
}

template <typename T>
Tensor4<T> bilinear_resize(const Tensor4<T>& src, int out_h, int out_w) {
  return bilinear_resize(src, make_resize_plan(src.h, src.w, out_h, out_w));
}

/// Adjoint of bilinear_resize: scatters output-space gradients back onto the
/// input grid with the same taps and weights.
template <typename T>
Tensor4<T> bilinear_resize_backward(const Tensor4<T>& grad_out, const ResizePlan& p) {
  if (p.identity()) return grad_out;
  Tensor4<T> grad_in(grad_out.n, grad_out.c, p.in_h, p.in_w);
  for (int in = 0; in < grad_out.n; ++in) {
    for (int y = 0; y < p.out_h; ++y) {
      const T fy = static_cast<T>(p.wy[y]);
      for (int x = 0; x < p.out_w; ++x) {
        const T fx = static_cast<T>(p.wx[x]);
        const auto g = grad_out.data.col(grad_out.col_index(in, y, x));
        grad_in.data.col(grad_in.col_index(in, p.y0[y], p.x0[x])) += g * ((T(1) - fx) * (T(1) - fy));
        grad_in.data.col(grad_in.col_index(in, p.y0[y], p.x1[x])) += g * (fx * (T(1) - fy));
        grad_in.data.col(grad_in.col_index(in, p.y1[y], p.x0[x])) += g * ((T(1) - fx) * fy);
        grad_in.data.col(grad_in.col_index(in, p.y1[y], p.x1[x])) += g * (fx * fy);
      }
    }
  }
  return grad_in;
}

/// Nearest-neighbor label downsampling (block-center sample). Interpolating
/// class ids would manufacture invalid fractional labels, so labels always
/// travel through this path.
inline LabelMap nn_downsample_labels(const LabelMap& src, int out_h, int out_w) {
  if (src.h == out_h && src.w == out_w) return src;
  LabelMap out(src.n, out_h, out_w);
  const double sy = static_cast<double>(src.h) / out_h;
  const double sx = static_cast<double>(src.w) / out_w;
  for (int in = 0; in < src.n; ++in) {
    for (int y = 0; y < out_h; ++y) {
      const int yy = std::min(static_cast<int>((y + 0.5) * sy), src.h - 1);
      for (int x = 0; x < out_w; ++x) {
        const int xx = std::min(static_cast<int>((x + 0.5) * sx), src.w - 1);
        out.at(in, y, x) = src.at(in, yy, xx);
      }
    }
  }
  return out;
}

/// Separable Gaussian blur with clamped borders. `sigma` is in pixels;
/// sigma <= 0 is a no-op.
template <typename T>
Tensor4<T> gaussian_blur(const Tensor4<T>& src, double sigma) {
  if (sigma <= 0.0) return src;
  const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
  std::vector<T> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[i + radius] = static_cast<T>(v);
    sum += v;
  }
  for (auto& k : kernel) k = static_cast<T>(k / sum);

  Tensor4<T> tmp(src.n, src.c, src.h, src.w);
  Tensor4<T> out(src.n, src.c, src.h, src.w);
  for (int in = 0; in < src.n; ++in) {
    for (int y = 0; y < src.h; ++y) {
      for (int x = 0; x < src.w; ++x) {
        auto acc = tmp.data.col(tmp.col_index(in, y, x));
        for (int k = -radius; k <= radius; ++k) {
          const int xx = std::clamp(x + k, 0, src.w - 1);
          acc += kernel[k + radius] * src.data.col(src.col_index(in, y, xx));
        }
      }
    }
    for (int y = 0; y < src.h; ++y) {
      for (int x = 0; x < src.w; ++x) {
        auto acc = out.data.col(out.col_index(in, y, x));
        for (int k = -radius; k <= radius; ++k) {
          const int yy = std::clamp(y + k, 0, src.h - 1);
          acc += kernel[k + radius] * tmp.data.col(tmp.col_index(in, yy, x));
        }
      }
    }
  }
  return out;
}

}  // namespace proca
