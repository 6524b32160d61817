#pragma once

#include <map>
#include <string>

#include "kgqa/numerics/parameters.hpp"

namespace kgqa::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are created lazily per parameter
/// name, so the optimizer can outlive a store being rebuilt with the same names.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update from every parameter's accumulated gradient.
  /// Gradients are left untouched; callers zero them.
  void step(ParameterStore& params);

  long steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };

  AdamConfig config_;
  long steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace kgqa::nn
