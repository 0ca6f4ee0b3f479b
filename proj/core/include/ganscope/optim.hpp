#pragma once

#include <cstdint>
#include <vector>

#include "ganscope/tensor.hpp"

namespace ganscope::ad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a fixed set of parameter tensors.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamOptions opts);

  /// Applies one update from the current gradients. Throws if any parameter
  /// has no gradient buffer.
  void step();
  void zero_grad();

  double lr() const noexcept { return opts_.lr; }
  void set_lr(double lr) noexcept { opts_.lr = lr; }
  std::int64_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return opts_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  AdamOptions opts_;
  std::int64_t t_ = 0;
};

}  // namespace ganscope::ad
