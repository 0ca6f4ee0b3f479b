#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganscope/scene.hpp"

namespace ganscope::stats {

/// Dense row-major square matrix of doubles.
struct Matrix {
  int n = 0;
  std::vector<double> a;

  Matrix() = default;
  explicit Matrix(int size, double fill = 0.0)
      : n(size), a(static_cast<std::size_t>(size) * size, fill) {}
  static Matrix identity(int size);
  static Matrix diagonal(std::span<const double> d);

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
  double trace() const;
  double frobenius() const;

  friend Matrix operator*(const Matrix& x, const Matrix& y);
  friend Matrix operator-(const Matrix& x, const Matrix& y);
  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Per-class pixel-count statistics, in pixels per image.
struct SegStatsRecord {
  std::vector<int> class_ids;
  std::vector<double> mean;
  Matrix cov;  // unbiased (N-1)
  std::int64_t n = 0;

  friend bool operator==(const SegStatsRecord&, const SegStatsRecord&) = default;
};

/// Streaming accumulator over per-image class counts.
///
/// Sums are kept as 64-bit integers, so merging partial accumulators in any
/// order gives exactly the same record as a single pass.
class Accumulator {
 public:
  explicit Accumulator(std::vector<int> class_ids);

  void add(const scene::SegMap& seg);
  /// counts[k] is the pixel count of class_ids[k].
  void add_counts(std::span<const int> counts);
  void merge(const Accumulator& other);

  std::int64_t count() const noexcept { return n_; }
  const std::vector<int>& class_ids() const noexcept { return ids_; }
  /// Throws std::invalid_argument when fewer than two images were added.
  SegStatsRecord record() const;

 private:
  std::vector<int> ids_;
  std::vector<int> slot_;  // class id -> index, -1 when absent
  std::int64_t n_ = 0;
  int pixels_ = -1;
  std::vector<std::int64_t> sum_;
  std::vector<std::int64_t> outer_;
};

SegStatsRecord accumulate(std::span<const scene::SegMap> segs, const std::vector<int>& class_ids);

/// Symmetric PSD square root via eigendecomposition. Eigenvalues down to
/// -1e-8 * trace are clamped to zero; anything more negative, or an
/// asymmetric input, throws std::invalid_argument.
Matrix matrix_sqrt_psd(const Matrix& m);

/// ||mu_g - mu_t||^2 + Tr(S_g) + Tr(S_t) - 2 Tr((S_t^1/2 S_g S_t^1/2)^1/2),
/// clamped at zero.
double fsd(const SegStatsRecord& g, const SegStatsRecord& t);
/// Same value without the final clamp.
double fsd_unclamped(const SegStatsRecord& g, const SegStatsRecord& t);

struct HistogramEntry {
  int class_id = 0;
  std::string name;
  double true_mean = 0.0;
  double gen_mean = 0.0;
  bool clipped = false;  // either bar exceeds the ceiling
  bool dropped = false;  // generated below kDroppedRatio of a nonzero true mean
};

inline constexpr double kDroppedRatio = 0.2;

struct HistogramReport {
  std::vector<HistogramEntry> entries;  // true mean descending, ties by id
  double clip_ceiling = 0.0;
  std::vector<std::string> warnings;
};

/// `names` is indexed by class id. A non-positive ceiling disables clipping.
HistogramReport histogram_report(const SegStatsRecord& g, const SegStatsRecord& t, int top_k,
                                 double clip_ceiling, const std::vector<std::string>& names);

struct SensitivityResult {
  double fsd_split = 0.0;
  SegStatsRecord a;
  SegStatsRecord b;
};

/// FSD between two disjoint random subsets of `counts` (one count vector per
/// image, indexed like `class_ids`), each of size n_per_split.
SensitivityResult sensitivity_test(const std::vector<std::vector<int>>& counts,
                                   const std::vector<int>& class_ids, int n_per_split,
                                   std::uint64_t seed);

/// Per-image count vectors for the given class ids.
std::vector<int> class_counts(const scene::SegMap& seg, const std::vector<int>& class_ids);

nlohmann::json to_json(const SegStatsRecord& r);
SegStatsRecord record_from_json(const nlohmann::json& j);

}  // namespace ganscope::stats
