#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ganscope/correlation.hpp"
#include "ganscope/rng.hpp"
#include "ganscope/seg_stats.hpp"

namespace {

using namespace ganscope;
using namespace ganscope::stats;

scene::SegMap random_map(Rng& rng, int classes, int side = 8) {
  scene::SegMap m(side, side);
  for (auto& l : m.labels) l = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(classes)));
  return m;
}

Matrix random_psd(Rng& rng, int n, int rank) {
  std::vector<double> a(static_cast<std::size_t>(rank) * n);
  for (double& v : a) v = rng.normal();
  Matrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < rank; ++k) s += a[k * n + i] * a[k * n + j];
      m(i, j) = s;
    }
  return m;
}

SegStatsRecord make_record(std::vector<double> mean, Matrix cov) {
  SegStatsRecord r;
  r.class_ids.resize(mean.size());
  std::iota(r.class_ids.begin(), r.class_ids.end(), 0);
  r.mean = std::move(mean);
  r.cov = std::move(cov);
  r.n = 100;
  return r;
}

TEST(Accumulator, HandComputedMeanAndCovariance) {
  Accumulator acc({0, 1});
  const std::vector<std::vector<int>> rows = {{3, 1}, {1, 3}, {2, 2}};
  for (const auto& r : rows) acc.add_counts(r);
  const SegStatsRecord rec = acc.record();
  EXPECT_EQ(rec.n, 3);
  EXPECT_DOUBLE_EQ(rec.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(rec.mean[1], 2.0);
  EXPECT_DOUBLE_EQ(rec.cov(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(rec.cov(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(rec.cov(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(rec.cov(1, 0), -1.0);
}

TEST(Accumulator, NeedsTwoImages) {
  Accumulator acc({0, 1});
  acc.add_counts(std::vector<int>{1, 2});
  EXPECT_THROW(acc.record(), std::invalid_argument);
}

TEST(Accumulator, StreamingMatchesTwoPass) {
  Rng rng(12);
  const std::vector<int> ids = {0, 1, 2, 3, 4};
  std::vector<scene::SegMap> maps;
  for (int i = 0; i < 1000; ++i) maps.push_back(random_map(rng, 5));

  const SegStatsRecord streamed = accumulate(maps, ids);
  std::vector<double> mean(5, 0.0);
  std::vector<std::vector<int>> counts;
  for (const auto& m : maps) counts.push_back(class_counts(m, ids));
  for (const auto& c : counts)
    for (int k = 0; k < 5; ++k) mean[k] += c[k];
  for (double& m : mean) m /= 1000.0;
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(streamed.mean[i], mean[i], 1e-9 * std::fabs(mean[i]));
    for (int j = 0; j < 5; ++j) {
      double s = 0.0;
      for (const auto& c : counts) s += (c[i] - mean[i]) * (c[j] - mean[j]);
      s /= 999.0;
      EXPECT_NEAR(streamed.cov(i, j), s, 1e-9 * std::max(1.0, std::fabs(s)));
    }
  }

  Accumulator a(ids), b(ids);
  for (std::size_t i = 0; i < maps.size(); ++i) (i % 3 == 0 ? a : b).add(maps[i]);
  b.merge(a);
  EXPECT_EQ(b.record(), streamed);
}

TEST(Accumulator, RecordJsonRoundTrip) {
  Rng rng(3);
  std::vector<scene::SegMap> maps;
  for (int i = 0; i < 20; ++i) maps.push_back(random_map(rng, 3));
  const SegStatsRecord r = accumulate(maps, {0, 1, 2});
  EXPECT_EQ(record_from_json(to_json(r)), r);
}

TEST(MatrixSqrt, ReconstructsRandomPsd) {
  Rng rng(44);
  for (int n : {1, 2, 9, 16, 33, 64}) {
    for (int rank : {n, std::max(1, n / 2)}) {
      const Matrix m = random_psd(rng, n, rank);
      const Matrix s = matrix_sqrt_psd(m);
      EXPECT_LT((s * s - m).frobenius() / m.frobenius(), 1e-8) << n << " rank " << rank;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) EXPECT_NEAR(s(i, j), s(j, i), 1e-9 * s.frobenius());
    }
  }
}

TEST(MatrixSqrt, RejectsInvalidInput) {
  Matrix asym = Matrix::identity(2);
  asym(0, 1) = 0.5;
  EXPECT_THROW(matrix_sqrt_psd(asym), std::invalid_argument);
  const double d[] = {1.0, -0.5};
  EXPECT_THROW(matrix_sqrt_psd(Matrix::diagonal(d)), std::invalid_argument);
}

TEST(Fsd, SelfDistanceIsZero) {
  Rng rng(8);
  for (int n : {2, 9, 30}) {
    std::vector<double> mean(n);
    for (double& m : mean) m = 100.0 * rng.uniform();
    const SegStatsRecord r = make_record(mean, random_psd(rng, n, n));
    EXPECT_LT(std::fabs(fsd_unclamped(r, r)), 1e-9 * std::max(1.0, r.cov.trace()));
    EXPECT_LT(fsd(r, r), 1e-9 * std::max(1.0, r.cov.trace()));
  }
}

TEST(Fsd, Symmetric) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 9;
    std::vector<double> ma(n), mb(n);
    for (int i = 0; i < n; ++i) {
      ma[i] = 50.0 * rng.uniform();
      mb[i] = 50.0 * rng.uniform();
    }
    const SegStatsRecord a = make_record(ma, random_psd(rng, n, n));
    const SegStatsRecord b = make_record(mb, random_psd(rng, n, 4));
    const double ab = fsd(a, b), ba = fsd(b, a);
    EXPECT_NEAR(ab, ba, 1e-9 * std::max(ab, ba));
  }
}

TEST(Fsd, DiagonalClosedForm) {
  const double g[] = {4.0, 1.0}, t[] = {1.0, 1.0};
  EXPECT_NEAR(fsd(make_record({0, 0}, Matrix::diagonal(g)), make_record({0, 0}, Matrix::diagonal(t))), 1.0, 1e-9);

  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 9;
    std::vector<double> mg(n), mt(n), vg(n), vt(n);
    double expected = 0.0;
    for (int i = 0; i < n; ++i) {
      mg[i] = 200.0 * rng.uniform();
      mt[i] = 200.0 * rng.uniform();
      vg[i] = trial % 4 == 0 && i == 0 ? 0.0 : 500.0 * rng.uniform();
      vt[i] = 500.0 * rng.uniform();
      const double dm = mg[i] - mt[i], ds = std::sqrt(vg[i]) - std::sqrt(vt[i]);
      expected += dm * dm + ds * ds;
    }
    const double got = fsd(make_record(mg, Matrix::diagonal(vg)), make_record(mt, Matrix::diagonal(vt)));
    EXPECT_NEAR(got, expected, 1e-9 * expected);
  }
}

TEST(Fsd, MeanShiftOnly) {
  Rng rng(11);
  const Matrix cov = random_psd(rng, 5, 5);
  const SegStatsRecord a = make_record({1, 2, 3, 4, 5}, cov);
  const SegStatsRecord b = make_record({1, 2, 3, 4, 8}, cov);
  EXPECT_NEAR(fsd(a, b), 9.0, 1e-7);
}

TEST(Histogram, SortedByTrueMeanAndFlagsDrop) {
  const std::vector<std::string> names = {"background", "a", "b", "c", "d"};
  const SegStatsRecord t = make_record({500, 40, 100, 60, 10}, Matrix::identity(5));
  const SegStatsRecord g = make_record({520, 38, 110, 5, 11}, Matrix::identity(5));
  const HistogramReport rep = histogram_report(g, t, 3, 0.0, names);
  ASSERT_EQ(rep.entries.size(), 3u);
  EXPECT_EQ(rep.entries[0].class_id, 0);
  EXPECT_EQ(rep.entries[1].class_id, 2);
  EXPECT_EQ(rep.entries[2].class_id, 3);
  EXPECT_TRUE(rep.entries[2].dropped);
  EXPECT_FALSE(rep.entries[1].dropped);
  ASSERT_FALSE(rep.warnings.empty());
  EXPECT_NE(rep.warnings[0].find("(c)"), std::string::npos);

  const HistogramReport clipped = histogram_report(g, t, 5, 200.0, names);
  EXPECT_TRUE(clipped.entries[0].clipped);
  EXPECT_FALSE(clipped.entries[1].clipped);
}

TEST(Sensitivity, SameDistributionShrinksWithSampleSize) {
  Rng rng(13);
  const std::vector<int> ids = {0, 1, 2};
  std::vector<std::vector<int>> counts;
  for (int i = 0; i < 20000; ++i) {
    const int a = static_cast<int>(rng.below(40)), b = static_cast<int>(rng.below(20));
    counts.push_back({64 - a / 2 - b / 2, a / 2, b / 2});
  }
  double small = 0.0, large = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    small += sensitivity_test(counts, ids, 1000, derive_seed(1, trial)).fsd_split;
    large += sensitivity_test(counts, ids, 10000, derive_seed(1, trial)).fsd_split;
  }
  EXPECT_LT(large, small);
  EXPECT_THROW(sensitivity_test(counts, ids, 10001, 1), std::invalid_argument);
}

TEST(Correlation, PerfectAntiAndRandom) {
  std::vector<float> a(10000), b(10000), neg(10000);
  Rng rng(21);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<float>(rng.normal());
    b[i] = static_cast<float>(rng.normal());
    neg[i] = -a[i];
  }
  EXPECT_NEAR(corr::pearson(a, a).value, 1.0, 1e-12);
  EXPECT_NEAR(corr::pearson(a, neg).value, -1.0, 1e-12);
  EXPECT_LT(std::fabs(corr::pearson(a, b).value), 0.05);

  corr::Pooled pooled;
  pooled.add(std::span(a).first(5000), std::span(a).first(5000));
  pooled.add(std::span(a).subspan(5000), std::span(a).subspan(5000));
  EXPECT_NEAR(pooled.result().value, 1.0, 1e-12);

  const std::vector<float> flat(10, 0.5f);
  EXPECT_TRUE(corr::pearson(flat, flat).degenerate);
  EXPECT_EQ(corr::pearson(flat, flat).value, 1.0);
}

}  // namespace
