#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

namespace proca {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;

using CountArray = Eigen::Array<long long, Eigen::Dynamic, 1>;
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense N x C x H x W tensor. Channels are the rows of one Eigen matrix whose
/// columns enumerate pixels as ((n * h) + y) * w + x, so a pixel's channel
/// vector is a contiguous (column-major) column. Per-pixel reductions and
/// prototype dot products are then plain matrix ops.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  Mat<T> data;  // c rows, n*h*w cols

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(Mat<T>::Zero(c_, static_cast<Eigen::Index>(n_) * h_ * w_)) {}

  Eigen::Index pixels() const { return static_cast<Eigen::Index>(n) * h * w; }
  Eigen::Index pixels_per_image() const { return static_cast<Eigen::Index>(h) * w; }
  Eigen::Index col_index(int in, int y, int x) const {
    return (static_cast<Eigen::Index>(in) * h + y) * w + x;
  }

  T& at(int in, int ic, int y, int x) { return data(ic, col_index(in, y, x)); }
  T at(int in, int ic, int y, int x) const { return data(ic, col_index(in, y, x)); }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  /// View of one image's pixels (c rows, h*w cols).
  auto image(int in) { return data.middleCols(col_index(in, 0, 0), pixels_per_image()); }
  auto image(int in) const { return data.middleCols(col_index(in, 0, 0), pixels_per_image()); }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out;
    out.n = n;
    out.c = c;
    out.h = h;
    out.w = w;
    out.data = data.template cast<U>();
    return out;
  }
};

/// Per-pixel integer class map, N x H x W, same pixel ordering as Tensor4.
struct LabelMap {
  int n = 0, h = 0, w = 0;
  Eigen::Array<std::int32_t, Eigen::Dynamic, 1> values;

  LabelMap() = default;
  LabelMap(int n_, int h_, int w_)
      : n(n_), h(h_), w(w_),
        values(Eigen::Array<std::int32_t, Eigen::Dynamic, 1>::Zero(
            static_cast<Eigen::Index>(n_) * h_ * w_)) {}

  Eigen::Index pixels() const { return static_cast<Eigen::Index>(n) * h * w; }
  Eigen::Index col_index(int in, int y, int x) const {
    return (static_cast<Eigen::Index>(in) * h + y) * w + x;
  }
  std::int32_t& at(int in, int y, int x) { return values(col_index(in, y, x)); }
  std::int32_t at(int in, int y, int x) const { return values(col_index(in, y, x)); }

  /// One image's labels as a flat segment of length h*w.
  auto image(int in) { return values.segment(col_index(in, 0, 0), static_cast<Eigen::Index>(h) * w); }
  auto image(int in) const {
    return values.segment(col_index(in, 0, 0), static_cast<Eigen::Index>(h) * w);
  }
};

/// Pixel value reserved for "ignore" in label maps (unlabeled / suppressed).
inline constexpr std::int32_t kIgnoreIndex = 0;

}  // namespace proca
