#include "ganscope/seg_stats.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "ganscope/rng.hpp"

namespace ganscope::stats {
namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EMat> view(const Matrix& m) { return {m.a.data(), m.n, m.n}; }

Matrix from_eigen(const EMat& e) {
  Matrix m(static_cast<int>(e.rows()));
  Eigen::Map<EMat>(m.a.data(), m.n, m.n) = e;
  return m;
}

void require_same_classes(const SegStatsRecord& g, const SegStatsRecord& t) {
  if (g.class_ids != t.class_ids) {
    throw std::invalid_argument("statistics cover different class lists");
  }
  if (g.mean.size() != g.class_ids.size() || t.mean.size() != t.class_ids.size() ||
      g.cov.n != static_cast<int>(g.class_ids.size()) ||
      t.cov.n != static_cast<int>(t.class_ids.size())) {
    throw std::invalid_argument("statistics record has inconsistent sizes");
  }
}

}  // namespace

Matrix Matrix::identity(int size) {
  Matrix m(size);
  for (int i = 0; i < size; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
  Matrix m(static_cast<int>(d.size()));
  for (int i = 0; i < m.n; ++i) m(i, i) = d[i];
  return m;
}

double Matrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n; ++i) t += (*this)(i, i);
  return t;
}

double Matrix::frobenius() const {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

Matrix operator*(const Matrix& x, const Matrix& y) {
  if (x.n != y.n) throw std::invalid_argument("matrix sizes differ");
  return from_eigen(view(x) * view(y));
}

Matrix operator-(const Matrix& x, const Matrix& y) {
  if (x.n != y.n) throw std::invalid_argument("matrix sizes differ");
  Matrix m(x.n);
  for (std::size_t i = 0; i < m.a.size(); ++i) m.a[i] = x.a[i] - y.a[i];
  return m;
}

Accumulator::Accumulator(std::vector<int> class_ids) : ids_(std::move(class_ids)) {
  if (ids_.empty()) throw std::invalid_argument("statistics need at least one class");
  const int max_id = *std::max_element(ids_.begin(), ids_.end());
  if (*std::min_element(ids_.begin(), ids_.end()) < 0 || max_id > 255) {
    throw std::invalid_argument("class ids must lie in [0, 255]");
  }
  slot_.assign(256, -1);
  for (std::size_t k = 0; k < ids_.size(); ++k) {
    if (slot_[ids_[k]] != -1) throw std::invalid_argument("duplicate class id " + std::to_string(ids_[k]));
    slot_[ids_[k]] = static_cast<int>(k);
  }
  sum_.assign(ids_.size(), 0);
  outer_.assign(ids_.size() * ids_.size(), 0);
}

void Accumulator::add(const scene::SegMap& seg) {
  const int pixels = seg.height * seg.width;
  if (pixels_ >= 0 && pixels != pixels_) {
    throw std::invalid_argument("segmentation maps have inconsistent resolutions (" +
                                std::to_string(pixels) + " vs " + std::to_string(pixels_) +
                                " pixels)");
  }
  pixels_ = pixels;
  std::vector<int> counts(ids_.size(), 0);
  for (std::uint8_t label : seg.labels) {
    const int k = slot_[label];
    if (k < 0) throw std::invalid_argument("label " + std::to_string(label) + " is not in the class list");
    ++counts[k];
  }
  add_counts(counts);
}

void Accumulator::add_counts(std::span<const int> counts) {
  if (counts.size() != ids_.size()) throw std::invalid_argument("count vector length mismatch");
  const std::size_t c = ids_.size();
  for (std::size_t i = 0; i < c; ++i) {
    sum_[i] += counts[i];
    for (std::size_t j = 0; j < c; ++j) {
      outer_[i * c + j] += static_cast<std::int64_t>(counts[i]) * counts[j];
    }
  }
  ++n_;
}

void Accumulator::merge(const Accumulator& other) {
  if (other.ids_ != ids_) throw std::invalid_argument("cannot merge accumulators over different classes");
  if (pixels_ >= 0 && other.pixels_ >= 0 && pixels_ != other.pixels_) {
    throw std::invalid_argument("segmentation maps have inconsistent resolutions");
  }
  if (pixels_ < 0) pixels_ = other.pixels_;
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += other.sum_[i];
  for (std::size_t i = 0; i < outer_.size(); ++i) outer_[i] += other.outer_[i];
  n_ += other.n_;
}

SegStatsRecord Accumulator::record() const {
  if (n_ < 2) throw std::invalid_argument("statistics need at least two images, got " + std::to_string(n_));
  const int c = static_cast<int>(ids_.size());
  SegStatsRecord r;
  r.class_ids = ids_;
  r.n = n_;
  r.mean.resize(c);
  for (int i = 0; i < c; ++i) r.mean[i] = static_cast<double>(sum_[i]) / static_cast<double>(n_);
  // n * sum(x_i x_j) - sum(x_i) sum(x_j) is exact in 64-bit integers for any
  // realistic image size and count.
  r.cov = Matrix(c);
  const double denom = static_cast<double>(n_) * static_cast<double>(n_ - 1);
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) {
      const std::int64_t num = n_ * outer_[static_cast<std::size_t>(i) * c + j] - sum_[i] * sum_[j];
      r.cov(i, j) = static_cast<double>(num) / denom;
    }
  }
  return r;
}

SegStatsRecord accumulate(std::span<const scene::SegMap> segs, const std::vector<int>& class_ids) {
  if (segs.empty()) throw std::invalid_argument("cannot accumulate an empty stream");
  Accumulator acc(class_ids);
  for (const auto& s : segs) acc.add(s);
  return acc.record();
}

Matrix matrix_sqrt_psd(const Matrix& m) {
  if (m.n < 1 || m.a.size() != static_cast<std::size_t>(m.n) * m.n) {
    throw std::invalid_argument("matrix_sqrt_psd needs a non-empty square matrix");
  }
  double scale = 0.0;
  for (double v : m.a) scale = std::max(scale, std::fabs(v));
  for (int i = 0; i < m.n; ++i) {
    for (int j = i + 1; j < m.n; ++j) {
      if (std::fabs(m(i, j) - m(j, i)) > 1e-9 * std::max(1.0, scale)) {
        throw std::invalid_argument("matrix_sqrt_psd: input is not symmetric (entry " +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
  const EMat sym = 0.5 * (view(m) + view(m).transpose());
  Eigen::SelfAdjointEigenSolver<EMat> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const double floor = -1e-8 * std::max(std::fabs(sym.trace()), 1e-300);
  Eigen::VectorXd root(m.n);
  for (int i = 0; i < m.n; ++i) {
    const double lambda = es.eigenvalues()(i);
    if (lambda < floor) {
      throw std::invalid_argument("matrix_sqrt_psd: eigenvalue " + std::to_string(lambda) +
                                  " is too negative for a PSD matrix");
    }
    root(i) = std::sqrt(std::max(lambda, 0.0));
  }
  const EMat& v = es.eigenvectors();
  EMat s = v * root.asDiagonal() * v.transpose();
  return from_eigen(0.5 * (s + s.transpose()));
}

double fsd_unclamped(const SegStatsRecord& g, const SegStatsRecord& t) {
  require_same_classes(g, t);
  double mean_term = 0.0;
  for (std::size_t i = 0; i < g.mean.size(); ++i) {
    const double d = g.mean[i] - t.mean[i];
    mean_term += d * d;
  }
  const Matrix root_t = matrix_sqrt_psd(t.cov);
  const EMat inner = view(root_t) * view(g.cov) * view(root_t);
  const Matrix cross = matrix_sqrt_psd(from_eigen(0.5 * (inner + inner.transpose())));
  return mean_term + g.cov.trace() + t.cov.trace() - 2.0 * cross.trace();
}

double fsd(const SegStatsRecord& g, const SegStatsRecord& t) {
  return std::max(0.0, fsd_unclamped(g, t));
}

HistogramReport histogram_report(const SegStatsRecord& g, const SegStatsRecord& t, int top_k,
                                 double clip_ceiling, const std::vector<std::string>& names) {
  require_same_classes(g, t);
  if (top_k < 1) throw std::invalid_argument("top_k must be positive");
  HistogramReport rep;
  rep.clip_ceiling = clip_ceiling;
  std::vector<std::size_t> order(t.class_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (t.mean[a] != t.mean[b]) return t.mean[a] > t.mean[b];
    return t.class_ids[a] < t.class_ids[b];
  });
  if (static_cast<std::size_t>(top_k) > order.size()) {
    rep.warnings.push_back("top_k " + std::to_string(top_k) + " exceeds " +
                           std::to_string(order.size()) + " classes; showing all");
    top_k = static_cast<int>(order.size());
  }
  for (int k = 0; k < top_k; ++k) {
    const std::size_t i = order[k];
    HistogramEntry e;
    e.class_id = t.class_ids[i];
    e.name = static_cast<std::size_t>(e.class_id) < names.size() ? names[e.class_id]
                                                                  : "class " + std::to_string(e.class_id);
    e.true_mean = t.mean[i];
    e.gen_mean = g.mean[i];
    e.clipped = clip_ceiling > 0.0 && (e.true_mean > clip_ceiling || e.gen_mean > clip_ceiling);
    e.dropped = e.true_mean > 0.0 && e.gen_mean < kDroppedRatio * e.true_mean;
    if (e.dropped) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * e.gen_mean / e.true_mean);
      rep.warnings.push_back("class " + std::to_string(e.class_id) + " (" + e.name +
                             ") is generated at " + buf + " of its true area");
    }
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

SensitivityResult sensitivity_test(const std::vector<std::vector<int>>& counts,
                                   const std::vector<int>& class_ids, int n_per_split,
                                   std::uint64_t seed) {
  if (n_per_split < 2) throw std::invalid_argument("n_per_split must be at least 2");
  if (counts.size() < 2 * static_cast<std::size_t>(n_per_split)) {
    throw std::invalid_argument("sensitivity test needs " + std::to_string(2 * n_per_split) +
                                " images, dataset has " + std::to_string(counts.size()));
  }
  std::vector<std::size_t> idx(counts.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
  Accumulator a(class_ids), b(class_ids);
  for (int k = 0; k < n_per_split; ++k) {
    a.add_counts(counts[idx[k]]);
    b.add_counts(counts[idx[n_per_split + k]]);
  }
  SensitivityResult res;
  res.a = a.record();
  res.b = b.record();
  res.fsd_split = fsd(res.a, res.b);
  return res;
}

std::vector<int> class_counts(const scene::SegMap& seg, const std::vector<int>& class_ids) {
  std::vector<int> by_id(256, 0);
  for (std::uint8_t label : seg.labels) ++by_id[label];
  std::vector<int> out;
  out.reserve(class_ids.size());
  for (int id : class_ids) out.push_back(by_id.at(id));
  return out;
}

nlohmann::json to_json(const SegStatsRecord& r) {
  return {{"units", "pixels per image"},
          {"class_ids", r.class_ids},
          {"mean", r.mean},
          {"cov", r.cov.a},
          {"n", r.n}};
}

SegStatsRecord record_from_json(const nlohmann::json& j) {
  SegStatsRecord r;
  try {
    r.class_ids = j.at("class_ids").get<std::vector<int>>();
    r.mean = j.at("mean").get<std::vector<double>>();
    r.cov.n = static_cast<int>(r.class_ids.size());
    r.cov.a = j.at("cov").get<std::vector<double>>();
    r.n = j.at("n").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed statistics record: ") + e.what());
  }
  if (r.mean.size() != r.class_ids.size() || r.cov.a.size() != r.class_ids.size() * r.class_ids.size()) {
    throw std::invalid_argument("statistics record sizes disagree with its class list");
  }
  if (r.n < 2) throw std::invalid_argument("statistics record needs n >= 2");
  return r;
}

}  // namespace ganscope::stats
