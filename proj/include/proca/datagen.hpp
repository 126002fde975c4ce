#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "proca/image_ops.hpp"
#include "proca/rng.hpp"
#include "proca/tensor.hpp"

namespace proca {

/// Appearance-only domain shift. Geometry and label maps are never touched,
/// so a source-trained decision boundary degrades on the target domain but
/// stays repairable from appearance cues.
struct ShiftSpec {
  std::array<double, 3> color_mul{1.0, 1.0, 1.0};
  std::array<double, 3> color_add{0.0, 0.0, 0.0};
  double noise_sigma = 0.0;
  bool texture_swap = false;
  double blur_radius = 0.0;

  bool is_zero() const {
    return color_mul == std::array<double, 3>{1.0, 1.0, 1.0} &&
           color_add == std::array<double, 3>{0.0, 0.0, 0.0} && noise_sigma == 0.0 &&
           !texture_swap && blur_radius == 0.0;
  }
};

/// Number of (shape, texture) archetypes the renderer knows; class c in
/// {1..num_classes} is bound to archetype c-1, so num_classes <= kNumArchetypes.
inline constexpr int kNumArchetypes = 8;

struct SceneSpec {
  int num_classes = 5;
  int height = 64;
  int width = 64;
  int shapes_min = 3;
  int shapes_max = 6;
  std::uint64_t seed = 0;
  ShiftSpec shift;
};

inline void validate(const SceneSpec& spec) {
  if (spec.num_classes < 2 || spec.num_classes > kNumArchetypes)
    throw ConfigError("scene: num_classes must be in [2, " + std::to_string(kNumArchetypes) +
                      "], got " + std::to_string(spec.num_classes));
  if (spec.height < 16 || spec.width < 16)
    throw ConfigError("scene: height and width must be >= 16");
  if (spec.shapes_min < 1 || spec.shapes_max < spec.shapes_min)
    throw ConfigError("scene: invalid shapes_per_image range");
}

template <typename T>
struct LabeledBatch {
  Tensor4<T> images;  // N x 3 x H x W in [0,1]
  LabelMap labels;    // values in {1..C}
};

/// Target-domain batch. Ground truth is retained for evaluation only; training
/// code paths receive the image tensor, never this struct's labels.
template <typename T>
class UnlabeledBatch {
 public:
  Tensor4<T> images;

  UnlabeledBatch() = default;
  UnlabeledBatch(Tensor4<T> imgs, LabelMap hidden)
      : images(std::move(imgs)), hidden_labels_(std::move(hidden)) {}

  const LabelMap& evaluation_labels() const { return hidden_labels_; }

 private:
  LabelMap hidden_labels_;
};

namespace detail {

enum class ShapeKind { disk, square, triangle, ring, diamond, ellipse, cross, hexagon };
enum class TextureKind { soft_diag, hstripes, checker, dots, vstripes, diagstripes, radial, gradient };

struct Archetype {
  ShapeKind shape;
  TextureKind texture;
  std::array<double, 3> color;
  double tex_amp;
  double tex_period;
};

inline const std::array<Archetype, kNumArchetypes>& archetypes() {
  static const std::array<Archetype, kNumArchetypes> table = {{
      {ShapeKind::disk, TextureKind::soft_diag, {0.30, 0.32, 0.36}, 0.05, 18.0},  // background
      {ShapeKind::disk, TextureKind::hstripes, {0.75, 0.22, 0.20}, 0.13, 6.0},
      {ShapeKind::square, TextureKind::checker, {0.18, 0.62, 0.28}, 0.13, 6.0},
      {ShapeKind::triangle, TextureKind::dots, {0.22, 0.34, 0.78}, 0.14, 5.0},
      {ShapeKind::ring, TextureKind::vstripes, {0.82, 0.72, 0.20}, 0.13, 6.0},
      {ShapeKind::diamond, TextureKind::diagstripes, {0.70, 0.25, 0.70}, 0.13, 6.0},
      {ShapeKind::ellipse, TextureKind::radial, {0.20, 0.68, 0.70}, 0.15, 10.0},
      {ShapeKind::cross, TextureKind::gradient, {0.85, 0.50, 0.20}, 0.12, 12.0},
  }};
  return table;
}

inline double texture_value(TextureKind kind, double x, double y, double phase, double period,
                            double cx, double cy) {
  const double tau = 2.0 * std::numbers::pi;
  switch (kind) {
    case TextureKind::soft_diag:
      return std::sin(tau * (x + y) / period + phase);
    case TextureKind::hstripes:
      return std::sin(tau * y / period + phase);
    case TextureKind::vstripes:
      return std::sin(tau * x / period + phase);
    case TextureKind::checker:
      return std::sin(tau * x / period + phase) * std::sin(tau * y / period + phase) > 0 ? 1.0 : -1.0;
    case TextureKind::dots: {
      const double u = std::sin(tau * x / period + phase);
      const double v = std::sin(tau * y / period + phase);
      return u * v > 0.55 ? 1.0 : -0.4;
    }
    case TextureKind::diagstripes:
      return std::sin(tau * (x - y) / period + phase);
    case TextureKind::radial: {
      const double r = std::hypot(x - cx, y - cy);
      return std::sin(tau * r / period + phase);
    }
    case TextureKind::gradient:
      return std::sin(tau * 0.5 * (x - cx) / period + phase);
  }
  return 0.0;
}

struct ShapeInstance {
  int class_id = 1;
  double cx = 0, cy = 0, radius = 0, rot = 0, phase = 0;
  std::array<double, 3> jitter{0, 0, 0};
};

inline bool inside(const ShapeInstance& s, ShapeKind kind, double px, double py) {
  const double dx0 = px - s.cx;
  const double dy0 = py - s.cy;
  const double c = std::cos(s.rot), sn = std::sin(s.rot);
  const double dx = c * dx0 + sn * dy0;
  const double dy = -sn * dx0 + c * dy0;
  const double r = s.radius;
  switch (kind) {
    case ShapeKind::disk:
      return dx * dx + dy * dy <= r * r;
    case ShapeKind::square:
      return std::abs(dx) <= r * 0.9 && std::abs(dy) <= r * 0.9;
    case ShapeKind::triangle: {
      // upright triangle: apex at (0,-r), base at y = +0.8r
      if (dy > 0.85 * r || dy < -r) return false;
      const double half = (dy + r) / 1.85 / r * 1.3 * r;
      return std::abs(dx) <= half;
    }
    case ShapeKind::ring: {
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= (0.38 * r) * (0.38 * r);
    }
    case ShapeKind::diamond:
      return std::abs(dx) + std::abs(dy) <= 1.15 * r;
    case ShapeKind::ellipse: {
      const double a = 1.15 * r, b = 0.7 * r;
      return (dx * dx) / (a * a) + (dy * dy) / (b * b) <= 1.0;
    }
    case ShapeKind::cross:
      return (std::abs(dx) <= 0.38 * r && std::abs(dy) <= 1.1 * r) ||
             (std::abs(dy) <= 0.38 * r && std::abs(dx) <= 1.1 * r);
    case ShapeKind::hexagon: {
      const double ax = std::abs(dx), ay = std::abs(dy);
      return ax <= 0.95 * r && ay <= 0.82 * r && (0.5 * ax + 0.866 * ay) <= 0.82 * r;
    }
  }
  return false;
}

/// Renders one clean (pre-shift) scene. texture_swap shifts each class to the
/// next archetype's texture parameters, leaving shape and color alone.
template <typename T>
void render_scene(const SceneSpec& spec, Rng& rng, bool swap_textures, Tensor4<T>& image,
                  LabelMap& labels, int image_index) {
  const auto& table = archetypes();
  const int h = spec.height, w = spec.width;
  const double scale = std::min(h, w);

  const auto tex_of = [&](int class_id) -> const Archetype& {
    if (!swap_textures) return table[class_id - 1];
    return table[class_id % kNumArchetypes];  // cyclic next archetype
  };

  // background
  ShapeInstance bg;
  bg.class_id = 1;
  bg.cx = w / 2.0;
  bg.cy = h / 2.0;
  bg.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int ch = 0; ch < 3; ++ch) bg.jitter[ch] = rng.uniform(-0.04, 0.04);
  const double illum = rng.uniform(0.96, 1.04);

  const int num_shapes = rng.uniform_int(spec.shapes_min, spec.shapes_max);
  std::vector<ShapeInstance> shapes(num_shapes);
  for (auto& s : shapes) {
    s.class_id = spec.num_classes > 1 ? rng.uniform_int(2, spec.num_classes) : 1;
    s.cx = rng.uniform(0.18, 0.82) * w;
    s.cy = rng.uniform(0.18, 0.82) * h;
    s.radius = rng.uniform(0.20, 0.32) * scale;
    s.rot = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int ch = 0; ch < 3; ++ch) s.jitter[ch] = rng.uniform(-0.09, 0.09);
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const ShapeInstance* hit = &bg;
      for (const auto& s : shapes)  // painter's order, later shapes on top
        if (inside(s, table[s.class_id - 1].shape, x + 0.5, y + 0.5)) hit = &s;
      const Archetype& base = table[hit->class_id - 1];
      const Archetype& tex = tex_of(hit->class_id);
      const double t = texture_value(tex.texture, x + 0.5, y + 0.5, hit->phase, tex.tex_period,
                                     hit->cx, hit->cy);
      const Eigen::Index col = image.col_index(image_index, y, x);
      for (int ch = 0; ch < 3; ++ch) {
        double v = (base.color[ch] + hit->jitter[ch]) * (1.0 + tex.tex_amp * t) * illum;
        image.data(ch, col) = static_cast<T>(std::clamp(v, 0.0, 1.0));
      }
      labels.at(image_index, y, x) = hit->class_id;
    }
  }
}

/// Applies the appearance shift to one image of a batch: blur, then the
/// per-channel color transform, then additive noise, then clamp to [0,1].
template <typename T>
void apply_shift(const ShiftSpec& shift, Rng& rng, Tensor4<T>& batch, int image_index) {
  if (shift.blur_radius > 0.0) {
    Tensor4<T> single(1, batch.c, batch.h, batch.w);
    single.data = batch.image(image_index);
    single = gaussian_blur(single, shift.blur_radius);
    batch.image(image_index) = single.data;
  }
  auto img = batch.image(image_index);
  for (int ch = 0; ch < 3; ++ch)
    img.row(ch) = img.row(ch) * static_cast<T>(shift.color_mul[ch]) +
                  Eigen::RowVectorX<T>::Constant(img.cols(), static_cast<T>(shift.color_add[ch]));
  if (shift.noise_sigma > 0.0) {
    for (Eigen::Index p = 0; p < img.cols(); ++p)
      for (int ch = 0; ch < 3; ++ch)
        img(ch, p) += static_cast<T>(shift.noise_sigma * rng.normal());
  }
  img = img.cwiseMax(T(0)).cwiseMin(T(1));
}

inline constexpr std::uint64_t kSourceTag = 0x736f7572u;  // substream tags
inline constexpr std::uint64_t kTargetTag = 0x74617267u;
inline constexpr std::uint64_t kShiftTag = 0x73686674u;

template <typename T>
void render_split(const SceneSpec& spec, int count, std::uint64_t domain_tag, bool shifted,
                  Tensor4<T>& images, LabelMap& labels) {
  images = Tensor4<T>(count, 3, spec.height, spec.width);
  labels = LabelMap(count, spec.height, spec.width);
  // Rejection sampling: re-render the split under a bumped attempt counter
  // until every class is present in its labels.
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt >= 64)
      throw ConfigError("datagen: could not cover all classes in a split; spec too sparse");
    for (int i = 0; i < count; ++i) {
      Rng rng = Rng::derive(spec.seed, {domain_tag, attempt, static_cast<std::uint64_t>(i)});
      render_scene(spec, rng, shifted && spec.shift.texture_swap, images, labels, i);
      if (shifted) {
        Rng shift_rng =
            Rng::derive(spec.seed, {domain_tag, kShiftTag, attempt, static_cast<std::uint64_t>(i)});
        apply_shift(spec.shift, shift_rng, images, i);
      }
    }
    BoolArray seen = BoolArray::Constant(spec.num_classes, false);
    for (Eigen::Index p = 0; p < labels.values.size(); ++p) seen[labels.values[p] - 1] = true;
    if (seen.all()) break;
  }
}

}  // namespace detail

/// Generates a labeled source split and an unlabeled target split drawn from
/// the same scene distribution, with the target rendered post-shift. Output is
/// fully determined by (spec, n_source, n_target).
template <typename T>
std::pair<LabeledBatch<T>, UnlabeledBatch<T>> generate_pair(const SceneSpec& spec, int n_source,
                                                            int n_target) {
  validate(spec);
  if (n_source < 1 || n_target < 1) throw ConfigError("generate_pair: counts must be >= 1");

  LabeledBatch<T> source;
  detail::render_split(spec, n_source, detail::kSourceTag, /*shifted=*/false, source.images,
                       source.labels);

  Tensor4<T> target_images;
  LabelMap target_labels;
  detail::render_split(spec, n_target, detail::kTargetTag, /*shifted=*/true, target_images,
                       target_labels);

  return {std::move(source), UnlabeledBatch<T>(std::move(target_images), std::move(target_labels))};
}

/// Per-class pixel counts over a labeled batch; counts[c-1] tallies class c.
/// num_classes = 0 sizes the result by the largest class present.
template <typename T>
CountArray class_pixel_histogram(const LabeledBatch<T>& batch, int num_classes = 0) {
  if (batch.labels.pixels() == 0) throw InputError("class_pixel_histogram: empty batch");
  if (num_classes == 0) num_classes = batch.labels.values.maxCoeff();
  CountArray counts = CountArray::Zero(std::max(num_classes, 1));
  for (Eigen::Index p = 0; p < batch.labels.values.size(); ++p) {
    const auto v = batch.labels.values[p];
    if (v >= 1) counts[v - 1] += 1;
  }
  return counts;
}

}  // namespace proca
