#pragma once

#include <cstdint>
#include <span>

namespace ganscope::corr {

struct Correlation {
  double value = 0.0;
  /// Set when either side had zero variance; value is then 1 for identical
  /// inputs and 0 otherwise.
  bool degenerate = false;
};

/// Pearson correlation of two equal-length sequences.
Correlation pearson(std::span<const float> a, std::span<const float> b);

/// Pools pairs from many images into one Pearson correlation.
class Pooled {
 public:
  void add(std::span<const float> truth, std::span<const float> estimate);
  Correlation result() const;
  std::int64_t count() const noexcept { return n_; }

 private:
  std::int64_t n_ = 0;
  double sa_ = 0, sb_ = 0, saa_ = 0, sbb_ = 0, sab_ = 0;
  bool identical_ = true;
};

}  // namespace ganscope::corr
