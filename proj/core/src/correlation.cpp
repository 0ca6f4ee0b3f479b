#include "ganscope/correlation.hpp"

#include <cmath>
#include <stdexcept>

namespace ganscope::corr {

void Pooled::add(std::span<const float> truth, std::span<const float> estimate) {
  if (truth.size() != estimate.size()) throw std::invalid_argument("correlation inputs differ in length");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double a = truth[i], b = estimate[i];
    sa_ += a;
    sb_ += b;
    saa_ += a * a;
    sbb_ += b * b;
    sab_ += a * b;
    identical_ = identical_ && truth[i] == estimate[i];
  }
  n_ += static_cast<std::int64_t>(truth.size());
}

Correlation Pooled::result() const {
  if (n_ == 0) throw std::invalid_argument("correlation of empty inputs");
  const double n = static_cast<double>(n_);
  const double va = saa_ - sa_ * sa_ / n;
  const double vb = sbb_ - sb_ * sb_ / n;
  const double cov = sab_ - sa_ * sb_ / n;
  const double tiny = 1e-12 * n;
  if (va <= tiny || vb <= tiny) return {identical_ ? 1.0 : 0.0, true};
  return {cov / std::sqrt(va * vb), false};
}

Correlation pearson(std::span<const float> a, std::span<const float> b) {
  Pooled p;
  p.add(a, b);
  return p.result();
}

}  // namespace ganscope::corr
