#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "proca/image_ops.hpp"
#include "proca/rng.hpp"
#include "proca/tensor.hpp"

namespace proca {

struct ModelConfig {
  int in_channels = 3;
  int stem_channels = 16;
  int feature_dim = 32;  // d, channel width of the extractor output
  int num_classes = 5;
  double init_gain = 0.12;   // Xavier scale of conv weights; LayerNorm makes
                             // the net invariant to it, smaller values raise
                             // the effective SGD rate on normalized layers
  double logit_scale = 14;  // fixed multiplier on classifier logits
};

/// One convolution, bias-free (the following LayerNorm affine absorbs it).
/// Weights are GEMM-ready: out_ch x (k*k*in_ch), column (ky*k + kx)*in_ch + ic,
/// matching the im2col patch layout.
template <typename T>
struct ConvWeight {
  int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0;
  Mat<T> weight;

  int out_size(int in) const { return (in + 2 * pad - k) / stride + 1; }
};

/// conv -> per-position channel LayerNorm -> tanh.
template <typename T>
struct ConvBlock {
  ConvWeight<T> conv;
  Mat<T> gamma;  // out_ch x 1
  Mat<T> beta;   // out_ch x 1
};

inline constexpr double kLayerNormEps = 1e-5;

/// Segmentation network: a 4-block normalized tanh convolutional extractor
/// with total stride 4 producing d-channel features, a 1x1 linear classifier,
/// and a bilinear upsampler back to input resolution followed by a stabilized
/// per-pixel softmax.
template <typename T>
struct SegModel {
  ModelConfig cfg;
  std::vector<ConvBlock<T>> blocks;  // 4 extractor blocks
  ConvWeight<T> classifier;          // 1x1 conv to num_classes logits
  Mat<T> classifier_bias;            // num_classes x 1

  static SegModel init(const ModelConfig& cfg, std::uint64_t seed) {
    SegModel m;
    m.cfg = cfg;
    const auto make_conv = [&](int in_ch, int out_ch, int k, int stride, int layer_idx,
                               double gain) {
      ConvWeight<T> conv;
      conv.in_ch = in_ch;
      conv.out_ch = out_ch;
      conv.k = k;
      conv.stride = stride;
      conv.pad = k / 2;
      conv.weight.resize(out_ch, k * k * in_ch);
      Rng rng = Rng::derive(seed, {0x6d6f64u, static_cast<std::uint64_t>(layer_idx)});
      const double fan_in = static_cast<double>(in_ch) * k * k;
      const double fan_out = static_cast<double>(out_ch) * k * k;
      const double limit = gain * std::sqrt(6.0 / (fan_in + fan_out));
      for (Eigen::Index i = 0; i < conv.weight.size(); ++i)
        conv.weight.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
      return conv;
    };
    const auto make_block = [&](int in_ch, int out_ch, int stride, int layer_idx) {
      ConvBlock<T> block;
      block.conv = make_conv(in_ch, out_ch, 3, stride, layer_idx, cfg.init_gain);
      block.gamma = Mat<T>::Constant(out_ch, 1, T(1));
      block.beta = Mat<T>::Zero(out_ch, 1);
      return block;
    };
    m.blocks.push_back(make_block(cfg.in_channels, cfg.stem_channels, 2, 0));
    m.blocks.push_back(make_block(cfg.stem_channels, cfg.feature_dim, 1, 1));
    m.blocks.push_back(make_block(cfg.feature_dim, cfg.feature_dim, 2, 2));
    m.blocks.push_back(make_block(cfg.feature_dim, cfg.feature_dim, 1, 3));
    // Zero-initialized head: early argmax decisions are then driven by
    // accumulated gradient directions instead of init noise.
    m.classifier = make_conv(cfg.feature_dim, cfg.num_classes, 1, 1, 4, 0.0);
    m.classifier_bias = Mat<T>::Zero(cfg.num_classes, 1);
    return m;
  }

  /// Visits (name, tensor) pairs in a stable order shared by gradients,
  /// optimizer state and checkpoints.
  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string prefix = "block" + std::to_string(i + 1);
      fn(prefix + ".weight", blocks[i].conv.weight);
      fn(prefix + ".gamma", blocks[i].gamma);
      fn(prefix + ".beta", blocks[i].beta);
    }
    fn(std::string("classifier.weight"), classifier.weight);
    fn(std::string("classifier.bias"), classifier_bias);
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    const_cast<SegModel*>(this)->for_each_param(
        [&](const std::string& name, Mat<T>& t) { fn(name, static_cast<const Mat<T>&>(t)); });
  }

  std::vector<Mat<T>> zero_grads() const {
    std::vector<Mat<T>> g;
    for_each_param([&](const std::string&, const Mat<T>& t) {
      g.push_back(Mat<T>::Zero(t.rows(), t.cols()));
    });
    return g;
  }

  bool params_finite() const {
    bool ok = true;
    for_each_param([&](const std::string&, const Mat<T>& t) { ok = ok && t.allFinite(); });
    return ok;
  }
};

namespace nn {

/// im2col: patch matrix with rows (ky*k + kx)*in_ch + ic and one column per
/// output position, zero-padded at the borders.
template <typename T>
Mat<T> im2col(const Tensor4<T>& x, const ConvWeight<T>& conv, int out_h, int out_w) {
  const int k = conv.k;
  Mat<T> patches = Mat<T>::Zero(static_cast<Eigen::Index>(k) * k * x.c,
                                static_cast<Eigen::Index>(x.n) * out_h * out_w);
  Eigen::Index col = 0;
  for (int in = 0; in < x.n; ++in) {
    for (int oy = 0; oy < out_h; ++oy) {
      const int iy0 = oy * conv.stride - conv.pad;
      for (int ox = 0; ox < out_w; ++ox, ++col) {
        const int ix0 = ox * conv.stride - conv.pad;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = iy0 + ky;
          if (iy < 0 || iy >= x.h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= x.w) continue;
            patches.block((static_cast<Eigen::Index>(ky) * k + kx) * x.c, col, x.c, 1) =
                x.data.col(x.col_index(in, iy, ix));
          }
        }
      }
    }
  }
  return patches;
}

/// Adjoint of im2col: scatter-adds patch-space gradients back onto the input.
template <typename T>
Tensor4<T> col2im(const Mat<T>& dpatches, const ConvWeight<T>& conv, int n, int in_h, int in_w,
                  int out_h, int out_w) {
  const int k = conv.k;
  Tensor4<T> dx(n, conv.in_ch, in_h, in_w);
  Eigen::Index col = 0;
  for (int in = 0; in < n; ++in) {
    for (int oy = 0; oy < out_h; ++oy) {
      const int iy0 = oy * conv.stride - conv.pad;
      for (int ox = 0; ox < out_w; ++ox, ++col) {
        const int ix0 = ox * conv.stride - conv.pad;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = iy0 + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= in_w) continue;
            dx.data.col(dx.col_index(in, iy, ix)) +=
                dpatches.block((static_cast<Eigen::Index>(ky) * k + kx) * conv.in_ch, col,
                               conv.in_ch, 1);
          }
        }
      }
    }
  }
  return dx;
}

/// Stabilized per-pixel softmax over channels (in place).
template <typename T>
void softmax_columns(Mat<T>& m) {
  for (Eigen::Index p = 0; p < m.cols(); ++p) {
    auto col = m.col(p);
    const T mx = col.maxCoeff();
    col = (col.array() - mx).exp();
    col /= col.sum();
  }
}

/// d(loss)/d(logits) given d(loss)/d(prob) for a per-pixel softmax.
template <typename T>
Mat<T> softmax_backward(const Mat<T>& dprob, const Mat<T>& prob) {
  Mat<T> dlogits(prob.rows(), prob.cols());
  for (Eigen::Index p = 0; p < prob.cols(); ++p) {
    const auto pr = prob.col(p);
    const T dot = dprob.col(p).dot(pr);
    dlogits.col(p) = pr.array() * (dprob.col(p).array() - dot);
  }
  return dlogits;
}

}  // namespace nn

/// Everything the backward pass needs from one forward evaluation.
template <typename T>
struct ForwardPass {
  int in_h = 0, in_w = 0;
  std::vector<Mat<T>> patches;     // im2col cache per extractor block
  std::vector<Mat<T>> ln_z;        // normalized pre-affine activations
  std::vector<Vec<T>> ln_inv_sd;   // 1/sqrt(var+eps) per position
  std::vector<Tensor4<T>> activations;  // post-tanh output per block
  Tensor4<T> logits_lr;            // classifier output at feature resolution
  Tensor4<T> prob;                 // upsampled, softmaxed, at input resolution
  ResizePlan up_plan;

  const Tensor4<T>& features() const { return activations.back(); }
};

template <typename T>
ForwardPass<T> forward(const SegModel<T>& model, const Tensor4<T>& images) {
  if (images.c != model.cfg.in_channels)
    throw InputError("forward: expected " + std::to_string(model.cfg.in_channels) +
                     " input channels, got " + std::to_string(images.c));
  if (images.h < 4 || images.w < 4) throw InputError("forward: input smaller than model stride");

  ForwardPass<T> fwd;
  fwd.in_h = images.h;
  fwd.in_w = images.w;
  const Tensor4<T>* x = &images;
  for (const auto& block : model.blocks) {
    const auto& conv = block.conv;
    const int oh = conv.out_size(x->h), ow = conv.out_size(x->w);
    fwd.patches.push_back(nn::im2col(*x, conv, oh, ow));
    Mat<T> pre = conv.weight * fwd.patches.back();

    // channel LayerNorm per position
    Mat<T> z(pre.rows(), pre.cols());
    Vec<T> inv_sd(pre.cols());
    const T inv_c = T(1) / static_cast<T>(pre.rows());
    for (Eigen::Index p = 0; p < pre.cols(); ++p) {
      auto col = pre.col(p);
      const T mu = col.sum() * inv_c;
      z.col(p) = col.array() - mu;
      const T var = z.col(p).squaredNorm() * inv_c;
      const T inv = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
      z.col(p) *= inv;
      inv_sd[p] = inv;
    }
    Tensor4<T> a(x->n, conv.out_ch, oh, ow);
    a.data = ((z.array().colwise() * block.gamma.col(0).array()).colwise() +
              block.beta.col(0).array())
                 .tanh();
    fwd.ln_z.push_back(std::move(z));
    fwd.ln_inv_sd.push_back(std::move(inv_sd));
    fwd.activations.push_back(std::move(a));
    x = &fwd.activations.back();
  }

  const auto& feat = fwd.features();
  fwd.logits_lr = Tensor4<T>(feat.n, model.cfg.num_classes, feat.h, feat.w);
  fwd.logits_lr.data.noalias() = model.classifier.weight * feat.data;
  fwd.logits_lr.data.colwise() += model.classifier_bias.col(0);
  fwd.logits_lr.data *= static_cast<T>(model.cfg.logit_scale);

  fwd.up_plan = make_resize_plan(feat.h, feat.w, images.h, images.w);
  fwd.prob = bilinear_resize(fwd.logits_lr, fwd.up_plan);
  nn::softmax_columns(fwd.prob.data);
  return fwd;
}

/// Mean cross-entropy of -log p at the ground-truth channel over non-ignored
/// pixels. The log is clamped at 1e-12 so saturated maps stay finite.
template <typename T>
T supervised_ce_loss(const Tensor4<T>& prob, const LabelMap& labels,
                     std::int32_t ignore_index = kIgnoreIndex) {
  if (prob.n != labels.n || prob.h != labels.h || prob.w != labels.w)
    throw InputError("supervised_ce_loss: prob/labels shape mismatch");
  double sum = 0.0;
  long valid = 0;
  for (Eigen::Index p = 0; p < prob.pixels(); ++p) {
    const std::int32_t y = labels.values[p];
    if (y == ignore_index) continue;
    if (y < 1 || y > prob.c)
      throw InputError("supervised_ce_loss: label " + std::to_string(y) + " out of range");
    sum -= std::log(std::max(static_cast<double>(prob.data(y - 1, p)), 1e-12));
    ++valid;
  }
  if (valid == 0) throw InputError("supervised_ce_loss: all pixels ignored, mean undefined");
  return static_cast<T>(sum / valid);
}

/// Gradient of supervised_ce_loss w.r.t. the full-resolution logits (softmax
/// and cross-entropy fused): (p - onehot)/valid on labeled pixels.
template <typename T>
Mat<T> ce_grad_logits(const Tensor4<T>& prob, const LabelMap& labels,
                      std::int32_t ignore_index = kIgnoreIndex) {
  long valid = 0;
  for (Eigen::Index p = 0; p < prob.pixels(); ++p)
    if (labels.values[p] != ignore_index) ++valid;
  Mat<T> g = Mat<T>::Zero(prob.c, prob.pixels());
  if (valid == 0) return g;
  const T scale = T(1) / static_cast<T>(valid);
  for (Eigen::Index p = 0; p < prob.pixels(); ++p) {
    const std::int32_t y = labels.values[p];
    if (y == ignore_index) continue;
    g.col(p) = prob.data.col(p) * scale;
    g(y - 1, p) -= scale;
  }
  return g;
}

/// Backpropagates loss gradients and accumulates parameter gradients (ordered
/// as for_each_param). `dfeat` is a gradient w.r.t. the extractor output
/// (d x pixels, feature resolution); `dlogits_full` w.r.t. the upsampled
/// logits (C x pixels, input resolution). Either may be null.
template <typename T>
void backward(const SegModel<T>& model, const ForwardPass<T>& fwd, const Mat<T>* dfeat,
              const Mat<T>* dlogits_full, std::vector<Mat<T>>& grads) {
  const auto& feat = fwd.features();
  Mat<T> dact = Mat<T>::Zero(feat.c, feat.pixels());
  if (dfeat) dact = *dfeat;

  const std::size_t nb = model.blocks.size();
  Mat<T>& d_cls_w = grads[3 * nb];
  Mat<T>& d_cls_b = grads[3 * nb + 1];

  if (dlogits_full) {
    Tensor4<T> dlog_full(fwd.prob.n, fwd.prob.c, fwd.prob.h, fwd.prob.w);
    dlog_full.data = *dlogits_full;
    Tensor4<T> dlog_lr = bilinear_resize_backward(dlog_full, fwd.up_plan);
    dlog_lr.data *= static_cast<T>(model.cfg.logit_scale);
    d_cls_w.noalias() += dlog_lr.data * feat.data.transpose();
    d_cls_b.col(0) += dlog_lr.data.rowwise().sum();
    dact.noalias() += model.classifier.weight.transpose() * dlog_lr.data;
  }

  for (int i = static_cast<int>(nb) - 1; i >= 0; --i) {
    const auto& block = model.blocks[i];
    const auto& act = fwd.activations[i];
    const auto& z = fwd.ln_z[i];
    const auto& inv_sd = fwd.ln_inv_sd[i];

    // tanh, then the LayerNorm affine
    Mat<T> du = dact.array() * (T(1) - act.data.array().square());
    grads[3 * i + 1].col(0) += (du.array() * z.array()).rowwise().sum().matrix();  // gamma
    grads[3 * i + 2].col(0) += du.rowwise().sum();                                 // beta
    Mat<T> dz = du.array().colwise() * block.gamma.col(0).array();

    // LayerNorm backward per position
    Mat<T> dpre(dz.rows(), dz.cols());
    const T inv_c = T(1) / static_cast<T>(dz.rows());
    for (Eigen::Index p = 0; p < dz.cols(); ++p) {
      const T mean_dz = dz.col(p).sum() * inv_c;
      const T mean_dzz = dz.col(p).dot(z.col(p)) * inv_c;
      dpre.col(p) =
          (dz.col(p).array() - mean_dz - z.col(p).array() * mean_dzz) * inv_sd[p];
    }

    grads[3 * i].noalias() += dpre * fwd.patches[i].transpose();  // conv weight
    if (i > 0) {
      const auto& prev = fwd.activations[i - 1];
      Mat<T> dpatches = block.conv.weight.transpose() * dpre;
      dact = nn::col2im(dpatches, block.conv, prev.n, prev.h, prev.w, act.h, act.w).data;
    }
  }
}

}  // namespace proca
