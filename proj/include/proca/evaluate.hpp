#pragma once

#include <cmath>
#include <vector>

#include "proca/image_ops.hpp"
#include "proca/model.hpp"
#include "proca/pseudolabel.hpp"
#include "proca/tensor.hpp"

namespace proca {

using ConfusionMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-class IoU and mIoU derived from a global confusion matrix.
/// mIoU averages the classes present in ground truth; classes absent from
/// both prediction and truth are excluded and recorded.
struct EvalResult {
  ConfusionMatrix confusion;      // rows: truth class, cols: predicted class
  Eigen::ArrayXd iou;             // [c-1]; 0 for present-but-never-correct
  std::vector<bool> present;      // class appears in ground truth
  std::vector<int> excluded;      // absent from both prediction and truth
  double miou = 0.0;
};

inline ConfusionMatrix confusion_matrix(const LabelMap& predicted, const LabelMap& truth,
                                        int num_classes) {
  if (predicted.pixels() != truth.pixels())
    throw InputError("confusion_matrix: prediction/truth size mismatch");
  ConfusionMatrix m = ConfusionMatrix::Zero(num_classes, num_classes);
  for (Eigen::Index p = 0; p < truth.values.size(); ++p) {
    const std::int32_t t = truth.values[p];
    if (t == kIgnoreIndex) continue;
    const std::int32_t q = predicted.values[p];
    if (t < 1 || t > num_classes || q < 1 || q > num_classes)
      throw InputError("confusion_matrix: class out of range");
    m(t - 1, q - 1) += 1;
  }
  return m;
}

inline EvalResult eval_from_confusion(const ConfusionMatrix& confusion) {
  const int num_classes = static_cast<int>(confusion.rows());
  EvalResult r;
  r.confusion = confusion;
  r.iou = Eigen::ArrayXd::Zero(num_classes);
  r.present.assign(num_classes, false);
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double tp = static_cast<double>(confusion(c, c));
    const double truth_total = static_cast<double>(confusion.row(c).sum());
    const double pred_total = static_cast<double>(confusion.col(c).sum());
    r.present[c] = truth_total > 0;
    if (truth_total == 0 && pred_total == 0) {
      r.excluded.push_back(c + 1);
      continue;
    }
    const double denom = truth_total + pred_total - tp;
    r.iou[c] = denom > 0 ? tp / denom : 0.0;
    if (r.present[c]) {
      sum += r.iou[c];
      ++counted;
    }
  }
  r.miou = counted > 0 ? sum / counted : std::numeric_limits<double>::quiet_NaN();
  return r;
}

/// Runs the model over an image set (optionally at several scales, averaging
/// the probability maps resized back to full resolution before argmax) and
/// scores predictions against ground truth. An empty scale list means plain
/// single-scale evaluation, identical to scales = {1.0}.
template <typename T>
EvalResult evaluate_model(const SegModel<T>& model, const Tensor4<T>& images,
                          const LabelMap& truth, const std::vector<double>& mst_scales = {},
                          int batch_size = 8) {
  std::vector<double> scales = mst_scales.empty() ? std::vector<double>{1.0} : mst_scales;
  ConfusionMatrix confusion = ConfusionMatrix::Zero(model.cfg.num_classes, model.cfg.num_classes);

  for (int start = 0; start < images.n; start += batch_size) {
    const int count = std::min(batch_size, images.n - start);
    Tensor4<T> chunk(count, images.c, images.h, images.w);
    for (int i = 0; i < count; ++i) chunk.image(i) = images.image(start + i);

    Tensor4<T> acc;
    for (std::size_t si = 0; si < scales.size(); ++si) {
      const int sh = std::max(8, static_cast<int>(std::lround(scales[si] * images.h)));
      const int sw = std::max(8, static_cast<int>(std::lround(scales[si] * images.w)));
      const Tensor4<T> scaled = bilinear_resize(chunk, sh, sw);
      Tensor4<T> prob = forward(model, scaled).prob;
      prob = bilinear_resize(prob, images.h, images.w);
      if (si == 0)
        acc = std::move(prob);
      else
        acc.data += prob.data;
    }
    if (scales.size() > 1) acc.data /= static_cast<T>(scales.size());

    const auto amc = argmax_confidence(acc);
    LabelMap truth_chunk(count, images.h, images.w);
    for (int i = 0; i < count; ++i) truth_chunk.image(i) = truth.image(start + i);
    confusion += confusion_matrix(amc.labels, truth_chunk, model.cfg.num_classes);
  }
  return eval_from_confusion(confusion);
}

}  // namespace proca
