#pragma once

#include <cmath>
#include <string>

#include "proca/prototypes.hpp"
#include "proca/tensor.hpp"

namespace proca {

/// Pseudo-labels with the confidence that produced them. labels == ignore
/// exactly where confidence fell below the active threshold.
template <typename T>
struct PseudoLabelMap {
  LabelMap labels;
  Arr<T> confidence;  // per-pixel max predicted probability
};

inline constexpr double kLogClamp = 1e-12;

/// Per-pixel prototype-assignment distribution: softmax over classes of
/// (prototype . feature / tau). With normalize, both sides are L2-normalized
/// first (cosine similarity). The bank is treated as a constant; gradients
/// flow into features only.
template <typename T>
Mat<T> similarity_dist(const Mat<T>& feats, const PrototypeBank<T>& bank, double tau,
                       bool normalize = false) {
  if (tau <= 0.0) throw ConfigError("similarity_dist: tau must be > 0");
  if (feats.rows() != bank.vectors.rows())
    throw InputError("similarity_dist: feature dim does not match bank");
  const auto missing = bank.missing_classes();
  if (!missing.empty())
    throw InputError("similarity_dist: prototype bank has uninitialized class " +
                     std::to_string(missing.front()));

  Mat<T> protos = bank.vectors;
  Mat<T> f = feats;
  if (normalize) {
    for (Eigen::Index c = 0; c < protos.cols(); ++c) {
      const T n = protos.col(c).norm();
      if (n > T(0)) protos.col(c) /= n;
    }
    for (Eigen::Index p = 0; p < f.cols(); ++p) {
      const T n = f.col(p).norm();
      if (n > T(0)) f.col(p) /= n;
    }
  }

  Mat<T> sim = (protos.transpose() * f) / static_cast<T>(tau);  // C x P
  for (Eigen::Index p = 0; p < sim.cols(); ++p) {
    auto col = sim.col(p);
    col = (col.array() - col.maxCoeff()).exp();
    col /= col.sum();
  }
  return sim;
}

/// One contrastive cross-entropy term. valid == 0 marks a skipped term (all
/// pixels ignored), which callers treat as a zero contribution.
template <typename T>
struct ContrastTerm {
  T loss = T(0);
  long valid = 0;
};

/// Mean over labeled pixels of -log S[label]: pulls each pixel toward its
/// class prototype and pushes it from the other prototypes through the
/// softmax denominator. If dfeat is non-null, weight * dLoss/dfeat is
/// accumulated into it.
template <typename T>
ContrastTerm<T> contrast_ce(const Mat<T>& feats, const PrototypeBank<T>& bank,
                            const LabelMap& labels, double tau, bool normalize = false,
                            Mat<T>* dfeat = nullptr, T weight = T(1),
                            std::int32_t ignore_index = kIgnoreIndex) {
  if (feats.cols() != labels.pixels())
    throw InputError("contrast_ce: features/labels pixel count mismatch");

  long valid = 0;
  for (Eigen::Index p = 0; p < labels.values.size(); ++p)
    if (labels.values[p] != ignore_index) ++valid;
  if (valid == 0) return {T(0), 0};

  const Mat<T> sim = similarity_dist(feats, bank, tau, normalize);

  double sum = 0.0;
  for (Eigen::Index p = 0; p < labels.values.size(); ++p) {
    const std::int32_t y = labels.values[p];
    if (y == ignore_index) continue;
    if (y < 1 || y > bank.num_classes())
      throw InputError("contrast_ce: label " + std::to_string(y) + " out of range");
    sum -= std::log(std::max(static_cast<double>(sim(y - 1, p)), kLogClamp));
  }

  if (dfeat) {
    Mat<T> protos = bank.vectors;
    if (normalize)
      for (Eigen::Index c = 0; c < protos.cols(); ++c) {
        const T n = protos.col(c).norm();
        if (n > T(0)) protos.col(c) /= n;
      }
    const T scale = weight / (static_cast<T>(tau) * static_cast<T>(valid));
    for (Eigen::Index p = 0; p < labels.values.size(); ++p) {
      const std::int32_t y = labels.values[p];
      if (y == ignore_index) continue;
      Vec<T> delta = sim.col(p);
      delta[y - 1] -= T(1);
      Vec<T> g = protos * delta * scale;  // d/d f-hat
      if (normalize) {
        const T n = feats.col(p).norm();
        if (n > T(0)) {
          const Vec<T> fhat = feats.col(p) / n;
          g = (g - fhat * fhat.dot(g)) / n;
        }
      }
      dfeat->col(p) += g;
    }
  }
  return {static_cast<T>(sum / valid), valid};
}

/// Cross-domain term: target features against pseudo-labels produced at the
/// contrast-stage confidence threshold. An all-ignored batch yields a zero
/// contribution (skipped, not fatal).
template <typename T>
ContrastTerm<T> contrast_loss_t2s(const Mat<T>& target_feats, const PrototypeBank<T>& bank,
                                  const PseudoLabelMap<T>& pseudo, double tau,
                                  bool normalize = false, Mat<T>* dfeat = nullptr,
                                  T weight = T(1)) {
  return contrast_ce(target_feats, bank, pseudo.labels, tau, normalize, dfeat, weight);
}

/// In-domain term: source features against ground-truth labels.
template <typename T>
ContrastTerm<T> contrast_loss_s2s(const Mat<T>& source_feats, const PrototypeBank<T>& bank,
                                  const LabelMap& labels, double tau, bool normalize = false,
                                  Mat<T>* dfeat = nullptr, T weight = T(1)) {
  return contrast_ce(source_feats, bank, labels, tau, normalize, dfeat, weight);
}

/// Feature-level sum of the in-domain and cross-domain terms (batch means in
/// place of dataset sums; a skipped term contributes zero).
template <typename T>
T contra_feat_loss(const Mat<T>& source_feats, const LabelMap& source_labels,
                   const Mat<T>& target_feats, const PseudoLabelMap<T>& target_pseudo,
                   const PrototypeBank<T>& bank, double tau, bool normalize = false) {
  const auto s2s = contrast_loss_s2s(source_feats, bank, source_labels, tau, normalize);
  const auto t2s = contrast_loss_t2s(target_feats, bank, target_pseudo, tau, normalize);
  return s2s.loss + t2s.loss;
}

/// Feature-level plus output-level objective. Output-level "features" are the
/// per-pixel probability vectors, contrasted against a bank of dimension C.
template <typename T>
T contra_total_loss(const Mat<T>& source_feats, const LabelMap& source_labels_lr,
                    const Mat<T>& target_feats, const PseudoLabelMap<T>& target_pseudo_lr,
                    const Mat<T>& source_probs, const LabelMap& source_labels_full,
                    const Mat<T>& target_probs, const PseudoLabelMap<T>& target_pseudo_full,
                    const PrototypeBank<T>& feat_bank, const PrototypeBank<T>& out_bank,
                    double tau_feat, double tau_out, bool normalize = false) {
  return contra_feat_loss(source_feats, source_labels_lr, target_feats, target_pseudo_lr,
                          feat_bank, tau_feat, normalize) +
         contra_feat_loss(source_probs, source_labels_full, target_probs, target_pseudo_full,
                          out_bank, tau_out, normalize);
}

}  // namespace proca
