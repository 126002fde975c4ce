#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "proca/contrast.hpp"
#include "proca/model.hpp"
#include "proca/tensor.hpp"

namespace proca {

/// Per-pixel argmax class (1-based) and its probability. Ties break toward
/// the lowest class index, deterministically.
template <typename T>
PseudoLabelMap<T> argmax_confidence(const Tensor4<T>& prob) {
  PseudoLabelMap<T> out;
  out.labels = LabelMap(prob.n, prob.h, prob.w);
  out.confidence = Arr<T>::Zero(prob.pixels());
  for (Eigen::Index p = 0; p < prob.pixels(); ++p) {
    Eigen::Index c;
    out.confidence[p] = prob.data.col(p).maxCoeff(&c);
    out.labels.values[p] = static_cast<std::int32_t>(c) + 1;
  }
  return out;
}

/// Class-agnostic thresholding at `threshold` (>= keeps the pixel). Used
/// during the contrast-adaptation stage and as naive self-training.
template <typename T>
PseudoLabelMap<T> fixed_threshold_labels(const Tensor4<T>& prob, double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw ConfigError("fixed_threshold_labels: threshold must lie in (0,1)");
  PseudoLabelMap<T> out = argmax_confidence(prob);
  for (Eigen::Index p = 0; p < out.confidence.size(); ++p)
    if (out.confidence[p] < static_cast<T>(threshold)) out.labels.values[p] = kIgnoreIndex;
  return out;
}

/// Ranked confidence sets: for each class c, the max-probabilities of all
/// pixels whose argmax class is c, sorted descending after finalize().
template <typename T>
struct ConfidenceSets {
  std::vector<std::vector<T>> per_class;  // [c-1]
  long long total = 0;
  bool finalized = false;

  explicit ConfidenceSets(int num_classes = 0) : per_class(num_classes) {}

  void accumulate(const Tensor4<T>& prob) {
    const auto amc = argmax_confidence(prob);
    for (Eigen::Index p = 0; p < amc.labels.values.size(); ++p) {
      per_class[amc.labels.values[p] - 1].push_back(amc.confidence[p]);
      ++total;
    }
    finalized = false;
  }

  void finalize() {
    for (auto& v : per_class) std::sort(v.begin(), v.end(), std::greater<T>());
    finalized = true;
  }

  long long length(int class_id) const {
    return static_cast<long long>(per_class[class_id - 1].size());
  }
};

/// Per-class confidence thresholds; classes with an empty confidence set are
/// unavailable (nullopt) and their pixels are ignored downstream.
template <typename T>
struct ThresholdTable {
  std::vector<std::optional<T>> thresholds;  // [c-1]
  double eta = 0.0;
};

/// Keep the most-confident eta fraction of each class's ranked set:
/// t_c = theta_{c,k} with k = max(1, ceil(eta * l_c)). Ties at the threshold
/// are all kept by the >= comparison downstream.
template <typename T>
ThresholdTable<T> adaptive_thresholds(const ConfidenceSets<T>& sets, double eta) {
  if (eta <= 0.0 || eta > 1.0) throw ConfigError("adaptive_thresholds: eta must lie in (0,1]");
  if (!sets.finalized) throw InputError("adaptive_thresholds: confidence sets not finalized");
  ThresholdTable<T> table;
  table.eta = eta;
  table.thresholds.resize(sets.per_class.size());
  for (std::size_t c = 0; c < sets.per_class.size(); ++c) {
    const auto& list = sets.per_class[c];
    if (list.empty()) continue;
    const long long l = static_cast<long long>(list.size());
    const long long k =
        std::max<long long>(1, static_cast<long long>(std::ceil(eta * static_cast<double>(l))));
    table.thresholds[c] = list[static_cast<std::size_t>(k - 1)];
  }
  return table;
}

/// Label each pixel with its argmax class where confidence clears that class's
/// threshold, ignore_index otherwise (including unavailable classes).
template <typename T>
PseudoLabelMap<T> apply_thresholds(const Tensor4<T>& prob, const ThresholdTable<T>& table) {
  PseudoLabelMap<T> out = argmax_confidence(prob);
  for (Eigen::Index p = 0; p < out.labels.values.size(); ++p) {
    const auto& t = table.thresholds[out.labels.values[p] - 1];
    if (!t || out.confidence[p] < *t) out.labels.values[p] = kIgnoreIndex;
  }
  return out;
}

/// Single inference pass over a target set, streaming max-probabilities into
/// per-class sorted sets.
template <typename T>
ConfidenceSets<T> build_confidence_sets(const SegModel<T>& model, const Tensor4<T>& images,
                                        int batch_size = 8) {
  if (images.n == 0) throw InputError("build_confidence_sets: empty image stream");
  ConfidenceSets<T> sets(model.cfg.num_classes);
  for (int start = 0; start < images.n; start += batch_size) {
    const int count = std::min(batch_size, images.n - start);
    Tensor4<T> chunk(count, images.c, images.h, images.w);
    for (int i = 0; i < count; ++i) chunk.image(i) = images.image(start + i);
    sets.accumulate(forward(model, chunk).prob);
  }
  sets.finalize();
  return sets;
}

/// Pseudo-labels an image set with per-class adaptive thresholds built from
/// the same model snapshot.
template <typename T>
PseudoLabelMap<T> generate_pseudo_labels(const SegModel<T>& model, const Tensor4<T>& images,
                                         const ThresholdTable<T>& table, int batch_size = 8) {
  PseudoLabelMap<T> out;
  out.labels = LabelMap(images.n, images.h, images.w);
  out.confidence = Arr<T>::Zero(out.labels.pixels());
  for (int start = 0; start < images.n; start += batch_size) {
    const int count = std::min(batch_size, images.n - start);
    Tensor4<T> chunk(count, images.c, images.h, images.w);
    for (int i = 0; i < count; ++i) chunk.image(i) = images.image(start + i);
    const auto part = apply_thresholds(forward(model, chunk).prob, table);
    const Eigen::Index offset = out.labels.col_index(start, 0, 0);
    out.labels.values.segment(offset, part.labels.values.size()) = part.labels.values;
    out.confidence.segment(offset, part.confidence.size()) = part.confidence;
  }
  return out;
}

}  // namespace proca
