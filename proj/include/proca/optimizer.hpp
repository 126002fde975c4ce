#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "proca/model.hpp"

namespace proca {

struct OptimConfig {
  double base_lr = 2.5e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double poly_power = 0.9;
};

/// SGD with momentum, L2 weight decay and polynomial learning-rate decay
/// lr(t) = base_lr * (1 - t/T)^power. One instance drives one training stage.
template <typename T>
class SgdPoly {
 public:
  SgdPoly(const OptimConfig& cfg, long total_steps) : cfg_(cfg), total_(total_steps) {}

  double lr_at(long step) const {
    const double frac = std::max(0.0, 1.0 - static_cast<double>(step) / total_);
    return cfg_.base_lr * std::pow(frac, cfg_.poly_power);
  }

  long current_step() const { return step_; }
  void set_step(long step) { step_ = step; }

  struct Outcome {
    bool applied = false;
    std::string diagnostic;
  };

  /// Applies one update. A non-finite loss or gradient aborts the step and
  /// surfaces a diagnostic instead of corrupting the parameters.
  Outcome step(SegModel<T>& model, const std::vector<Mat<T>>& grads, double loss) {
    if (!std::isfinite(loss))
      return {false, "optimizer: non-finite loss " + std::to_string(loss) + " at step " +
                         std::to_string(step_)};
    for (const auto& g : grads)
      if (!g.allFinite()) return {false, "optimizer: non-finite gradient at step " +
                                             std::to_string(step_)};

    if (velocity_.empty()) velocity_ = model.zero_grads();
    const T lr = static_cast<T>(lr_at(step_));
    const T mom = static_cast<T>(cfg_.momentum);
    const T wd = static_cast<T>(cfg_.weight_decay);
    std::size_t i = 0;
    model.for_each_param([&](const std::string&, Mat<T>& param) {
      velocity_[i] = mom * velocity_[i] + grads[i] + wd * param;
      param -= lr * velocity_[i];
      ++i;
    });
    ++step_;
    return {true, {}};
  }

 private:
  OptimConfig cfg_;
  long total_ = 1;
  long step_ = 0;
  std::vector<Mat<T>> velocity_;
};

}  // namespace proca
