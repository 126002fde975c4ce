#pragma once

#include <optional>
#include <string>

#include "proca/tensor.hpp"

namespace proca {

enum class BankLevel { feature, output };

/// Per-class masked means over one mini-batch: centroids.col(c-1) is the mean
/// vector of pixels labeled c, defined only where counts[c-1] > 0.
template <typename T>
struct BatchStats {
  Mat<T> centroids;   // dim x C
  CountArray counts;  // per-class pixel counts in this batch
};

/// Class-wise prototype bank. vectors.col(c-1) is the prototype of class c;
/// counts accumulate the pixels that produced it. A class with counts == 0 is
/// uninitialized and its vector must not be read (consumers check the mask).
///
/// For the mixed updating scheme the bank additionally tracks one running
/// estimate per domain; the public vectors are then the m-blend of the two.
template <typename T>
struct PrototypeBank {
  BankLevel level = BankLevel::feature;
  Mat<T> vectors;        // dim x C
  CountArray counts;     // accumulated pixels per class
  BoolArray initialized;

  struct DomainEstimate {
    Mat<T> vectors;
    CountArray counts;
    BoolArray initialized;
  };
  std::optional<DomainEstimate> source_estimate;  // engaged by update_mixed
  std::optional<DomainEstimate> target_estimate;

  int dim() const { return static_cast<int>(vectors.rows()); }
  int num_classes() const { return static_cast<int>(vectors.cols()); }

  std::vector<int> missing_classes() const {
    std::vector<int> missing;
    for (int c = 0; c < num_classes(); ++c)
      if (!initialized[c]) missing.push_back(c + 1);
    return missing;
  }
};

template <typename T>
PrototypeBank<T> make_bank(BankLevel level, int dim, int num_classes) {
  PrototypeBank<T> bank;
  bank.level = level;
  bank.vectors = Mat<T>::Zero(dim, num_classes);
  bank.counts = CountArray::Zero(num_classes);
  bank.initialized = BoolArray::Constant(num_classes, false);
  return bank;
}

/// Per-class masked means over non-ignored pixels of this batch only.
/// features is dim x pixels; labels must be at the same resolution.
template <typename T>
BatchStats<T> batch_stats(const Mat<T>& features, const LabelMap& labels, int num_classes,
                          std::int32_t ignore_index = kIgnoreIndex) {
  if (features.cols() != labels.pixels())
    throw InputError("batch_stats: features/labels pixel count mismatch");
  BatchStats<T> stats;
  stats.centroids = Mat<T>::Zero(features.rows(), num_classes);
  stats.counts = CountArray::Zero(num_classes);
  for (Eigen::Index p = 0; p < labels.values.size(); ++p) {
    const std::int32_t y = labels.values[p];
    if (y == ignore_index) continue;
    if (y < 1 || y > num_classes)
      throw InputError("batch_stats: label " + std::to_string(y) + " out of range");
    stats.centroids.col(y - 1) += features.col(p);
    stats.counts[y - 1] += 1;
  }
  for (int c = 0; c < num_classes; ++c)
    if (stats.counts[c] > 0) stats.centroids.col(c) /= static_cast<T>(stats.counts[c]);
  return stats;
}

namespace detail {

/// Weighted-mean accumulation of batch stats into (vectors, counts, mask);
/// classes absent from the batch stay untouched, uninitialized classes adopt
/// the batch centroid directly.
template <typename T>
void accumulate(Mat<T>& vectors, CountArray& counts, BoolArray& initialized,
                const BatchStats<T>& stats) {
  for (int c = 0; c < vectors.cols(); ++c) {
    const long long add = stats.counts[c];
    if (add == 0) continue;
    if (!initialized[c]) {
      vectors.col(c) = stats.centroids.col(c);
      counts[c] = add;
      initialized[c] = true;
    } else {
      const T n = static_cast<T>(counts[c]);
      const T m = static_cast<T>(add);
      vectors.col(c) = (vectors.col(c) * n + stats.centroids.col(c) * m) / (n + m);
      counts[c] += add;
    }
  }
}

}  // namespace detail

/// Strict statistical (running global mean) update. Streaming any partition of
/// a dataset through this equals the one-shot global mean up to rounding.
template <typename T>
void update_statistical(PrototypeBank<T>& bank, const BatchStats<T>& stats) {
  if (stats.centroids.rows() != bank.vectors.rows())
    throw InputError("update_statistical: stats dimension does not match bank level");
  detail::accumulate(bank.vectors, bank.counts, bank.initialized, stats);
}

/// Prototype initialization from a labeled stream: fold batch_stats of every
/// batch through update_statistical starting from an empty bank. Classes never
/// seen stay uninitialized rather than raising.
template <typename T>
void init_from_source(PrototypeBank<T>& bank, const Mat<T>& features, const LabelMap& labels,
                      std::int32_t ignore_index = kIgnoreIndex) {
  update_statistical(bank, batch_stats(features, labels, bank.num_classes(), ignore_index));
}

/// Mixed-domain update: refreshes per-domain running means with this step's
/// stats, then rebuilds the public prototypes as m * source + (1-m) * target.
/// Classes with only one side available fall back to that side.
template <typename T>
void update_mixed(PrototypeBank<T>& bank, const BatchStats<T>& source_stats,
                  const BatchStats<T>& target_stats, double m) {
  if (m < 0.0 || m > 1.0)
    throw ConfigError("update_mixed: momentum m must lie in [0,1], got " + std::to_string(m));
  if (source_stats.centroids.rows() != bank.vectors.rows() ||
      target_stats.centroids.rows() != bank.vectors.rows())
    throw InputError("update_mixed: stats dimension does not match bank level");

  const auto ensure = [&](std::optional<typename PrototypeBank<T>::DomainEstimate>& est) {
    if (!est) {
      est.emplace();
      est->vectors = Mat<T>::Zero(bank.dim(), bank.num_classes());
      est->counts = CountArray::Zero(bank.num_classes());
      est->initialized = BoolArray::Constant(bank.num_classes(), false);
    }
  };
  ensure(bank.source_estimate);
  ensure(bank.target_estimate);

  detail::accumulate(bank.source_estimate->vectors, bank.source_estimate->counts,
                     bank.source_estimate->initialized, source_stats);
  detail::accumulate(bank.target_estimate->vectors, bank.target_estimate->counts,
                     bank.target_estimate->initialized, target_stats);

  const auto& src = *bank.source_estimate;
  const auto& tgt = *bank.target_estimate;
  for (int c = 0; c < bank.num_classes(); ++c) {
    if (src.initialized[c] && tgt.initialized[c]) {
      bank.vectors.col(c) =
          static_cast<T>(m) * src.vectors.col(c) + static_cast<T>(1.0 - m) * tgt.vectors.col(c);
    } else if (src.initialized[c]) {
      bank.vectors.col(c) = src.vectors.col(c);
    } else if (tgt.initialized[c]) {
      bank.vectors.col(c) = tgt.vectors.col(c);
    } else {
      continue;
    }
    bank.counts[c] = src.counts[c] + tgt.counts[c];
    bank.initialized[c] = true;
  }
}

/// Seeds the mixed scheme's source-domain running estimate with the bank's
/// initialization state, so the blend starts anchored at the source prototypes.
template <typename T>
void seed_source_estimate(PrototypeBank<T>& bank) {
  typename PrototypeBank<T>::DomainEstimate est;
  est.vectors = bank.vectors;
  est.counts = bank.counts;
  est.initialized = bank.initialized;
  bank.source_estimate = std::move(est);
}

}  // namespace proca
