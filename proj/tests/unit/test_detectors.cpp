#include "anomale/detectors.hpp"

#include "support/detector_oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace anomale;
using namespace anomale::testkit;

namespace {
Matrix permuted_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(perm[i]));
  return out;
}

DetectorModel fit_default(DetectorKind k, const Matrix& x, double c, std::uint64_t seed = 1) {
  const int p = k == DetectorKind::pca ? 2 : k == DetectorKind::iforest ? 50 : k == DetectorKind::cblof ? 3 : 10;
  return fit_detector(k, x, p, c, seed);
}
}  // namespace

TEST(Threshold, LinearInterpolationQuantile) {
  const std::vector<double> s{4, 1, 3, 2, 5};
  EXPECT_DOUBLE_EQ(contamination_threshold(s, 0.1), 4.6);
  EXPECT_DOUBLE_EQ(contamination_threshold(s, 0.5), 3.0);
  Rng rng(3);
  std::vector<double> v(97);
  for (auto& x : v) x = rng.normal();
  for (double c : {0.01, 0.05, 0.2, 0.5}) EXPECT_EQ(contamination_threshold(v, c), quantile_oracle(v, 1.0 - c));
}

TEST(Threshold, ContaminationRange) {
  const std::vector<double> s{1, 2};
  EXPECT_THROW(contamination_threshold(s, 0.0), std::invalid_argument);
  EXPECT_THROW(contamination_threshold(s, 0.51), std::invalid_argument);
  EXPECT_NO_THROW(contamination_threshold(s, 0.5));
}

TEST(Threshold, FlagRuleIsScoreAtLeastThreshold) {
  Rng rng(4);
  const Matrix x = gaussian_rows(rng, 300, 3);
  for (auto k : kAllDetectors) {
    const auto m = fit_default(k, x, 0.1);
    const auto p = predict(m, x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_EQ(p.anomaly[static_cast<std::size_t>(i)], p.scores[i] >= m.threshold);
    const Vector s = score_samples(m, x);
    EXPECT_EQ(m.threshold, quantile_oracle(std::vector<double>(s.data(), s.data() + s.size()), 0.9));
  }
}

TEST(Threshold, FlaggedFractionNearContamination) {
  Rng rng(5);
  const Matrix x = gaussian_rows(rng, 2000, 4);
  const double tol = 2.0 / std::sqrt(2000.0);
  for (auto k : kAllDetectors) {
    for (double c : {0.02, 0.1, 0.3}) {
      const auto m = fit_default(k, x, c);
      EXPECT_NEAR(flagged_fraction(score_samples(m, x), m.threshold), c, tol) << to_string(k) << " c=" << c;
    }
  }
}

TEST(Detectors, EmptyAndWrongWidthInputs) {
  Rng rng(6);
  const Matrix x = gaussian_rows(rng, 50, 3);
  for (auto k : kAllDetectors) {
    const auto m = fit_default(k, x, 0.1);
    const auto p = predict(m, Matrix(0, 3));
    EXPECT_EQ(p.scores.size(), 0);
    EXPECT_TRUE(p.anomaly.empty());
    EXPECT_THROW(score_samples(m, Matrix::Zero(2, 4)), ShapeError);
  }
}

TEST(Detectors, ScoresAreRowPermutationEquivariant) {
  Rng rng(7);
  const Matrix x = gaussian_rows(rng, 120, 3);
  const Matrix test = gaussian_rows(rng, 40, 3);
  const auto perm = rng.permutation(40);
  for (auto k : kAllDetectors) {
    const auto m = fit_default(k, x, 0.1);
    const Vector s = score_samples(m, test);
    const Vector ps = score_samples(m, permuted_rows(test, perm));
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(ps[static_cast<Eigen::Index>(i)], s[static_cast<Eigen::Index>(perm[i])]);
  }
}

TEST(Detectors, FitIsStableUnderSeedAndRowOrder) {
  Rng rng(8);
  const Matrix x = gaussian_rows(rng, 200, 3);
  const Matrix test = gaussian_rows(rng, 30, 3);
  const Matrix shuffled = permuted_rows(x, rng.permutation(200));
  for (auto k : kAllDetectors) {
    const Vector a = score_samples(fit_default(k, x, 0.1, 9), test);
    EXPECT_EQ(a, score_samples(fit_default(k, x, 0.1, 9), test));
    if (k == DetectorKind::hbos) EXPECT_EQ(a, score_samples(fit_default(k, shuffled, 0.1), test));
    if (k == DetectorKind::pca) EXPECT_TRUE(a.isApprox(score_samples(fit_default(k, shuffled, 0.1), test), 1e-10));
  }
}

TEST(Detectors, SerializationRoundTrip) {
  Rng rng(9);
  const Matrix x = gaussian_rows(rng, 80, 3);
  const Matrix test = gaussian_rows(rng, 20, 3);
  for (auto k : kAllDetectors) {
    const auto m = fit_default(k, x, 0.05);
    const std::string text = serialize_detector(m);
    const auto back = deserialize_detector(text);
    EXPECT_EQ(back.kind, k);
    EXPECT_EQ(back.threshold, m.threshold);
    EXPECT_EQ(back.primary_parameter(), m.primary_parameter());
    EXPECT_EQ(score_samples(back, test), score_samples(m, test));
    EXPECT_EQ(serialize_detector(back), text);
  }
  EXPECT_THROW(deserialize_detector("{}"), std::exception);
}

TEST(Detectors, KindNames) {
  for (auto k : kAllDetectors) EXPECT_EQ(parse_detector_kind(to_string(k)), k);
  EXPECT_THROW(parse_detector_kind("ocsvm"), std::invalid_argument);
}

TEST(Pca, TrainMeanScoresZero) {
  Rng rng(10);
  const Matrix x = correlated_rows(rng, 500);
  const auto m = fit_pca(x, 2, 0.1);
  const Matrix mean = x.colwise().mean();
  EXPECT_NEAR(score_samples(m, mean)[0], 0.0, 1e-20);
}

TEST(Pca, FullRankMatchesMahalanobis) {
  Rng rng(11);
  const Matrix x = correlated_rows(rng, 400);
  const Matrix test = correlated_rows(rng, 50) * 1.3;
  const auto m = fit_pca(x, 3, 0.1);
  const Vector got = score_samples(m, test);
  const Vector want = mahalanobis(x, test);
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, FullRankScoreInvariantUnderRotation) {
  Rng rng(12);
  const Matrix x = correlated_rows(rng, 400);
  const Matrix test = correlated_rows(rng, 30);
  const RowVector mean = x.colwise().mean();
  const RowVector sd = ((x.rowwise() - mean).colwise().squaredNorm() / 399.0).cwiseSqrt();
  auto standardise = [&](const Matrix& m) { return Matrix((m.rowwise() - mean).array().rowwise() / sd.array()); };
  const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian_rows(rng, 3, 3)).householderQ();
  const Matrix z = standardise(x), zt = standardise(test);
  const Vector a = score_samples(fit_pca(z, 3, 0.1), zt);
  const Vector b = score_samples(fit_pca(z * q, 3, 0.1), zt * q);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((a - mahalanobis(z, zt)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, OriginOfIsotropicGaussianIsBelowThreshold) {
  Rng rng(13);
  const Matrix x = gaussian_rows(rng, 1000, 2);
  for (double c : {0.01, 0.05, 0.1}) {
    const auto m = fit_pca(x, 2, c);
    EXPECT_LT(score_samples(m, Matrix::Zero(1, 2))[0], m.threshold);
  }
}

TEST(Pca, ZeroVarianceColumnDroppedAndRankChecked) {
  Rng rng(14);
  Matrix x = gaussian_rows(rng, 100, 3);
  x.col(1).setConstant(4.0);
  const auto m = fit_pca(x, 2, 0.1);
  EXPECT_EQ(std::get<PcaState>(m.state).kept_columns, (std::vector<int>{0, 2}));
  EXPECT_THROW(fit_pca(x, 3, 0.1), std::invalid_argument);
  Matrix dup = gaussian_rows(rng, 100, 2);
  Matrix rank1(100, 2);
  rank1 << dup.col(0), dup.col(0) * 2.0;
  EXPECT_THROW(fit_pca(rank1, 2, 0.1), std::invalid_argument);
  EXPECT_NO_THROW(fit_pca(rank1, 1, 0.1));
  EXPECT_THROW(fit_pca(x, 0, 0.1), std::invalid_argument);
}

TEST(IForest, AveragePathLength) {
  EXPECT_EQ(average_path_length(2.0), 1.0);
  EXPECT_EQ(average_path_length(1.0), 0.0);
  const double n = 256.0;
  EXPECT_NEAR(average_path_length(n), 2.0 * (std::log(n - 1.0) + 0.5772156649) - 2.0 * (n - 1.0) / n, 1e-15);
}

TEST(IForest, FarOutlierScoresHighest) {
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const Matrix x = cluster_with_outlier(rng);
    const auto m = fit_iforest(x, 100, 0.05, seed);
    const Vector s = score_samples(m, x);
    Eigen::Index arg = 0;
    s.maxCoeff(&arg);
    EXPECT_EQ(arg, x.rows() - 1) << "seed " << seed;
    EXPECT_GT(s[x.rows() - 1], s.head(x.rows() - 1).maxCoeff());
  }
}

TEST(IForest, ShapeOfForestAndDuplicates) {
  Rng rng(15);
  Matrix x = gaussian_rows(rng, 1000, 2);
  x.row(5) = x.row(6);
  const auto m = fit_iforest(x, 20, 0.1, 3);
  const auto& st = std::get<IForestState>(m.state);
  EXPECT_EQ(st.subsample_size, 256);
  EXPECT_EQ(st.height_limit, 8);
  EXPECT_EQ(st.trees.size(), 20u);
  const Vector s = score_samples(m, x);
  EXPECT_EQ(s[5], s[6]);
  EXPECT_TRUE((s.array() > 0.0).all() && (s.array() < 1.0).all());
  EXPECT_THROW(fit_iforest(x.topRows(1), 10, 0.1, 1), std::invalid_argument);
}

TEST(Hbos, MatchesBruteForce) {
  Rng rng(16);
  const Matrix x = gaussian_rows(rng, 500, 4);
  Matrix test = gaussian_rows(rng, 100, 4, 2.0);  // includes out-of-range values
  for (int bins : {2, 5, 10, 40}) {
    const auto m = fit_hbos(x, bins, 0.1);
    EXPECT_EQ(score_samples(m, test), hbos_brute_force(x, bins, test)) << bins;
    EXPECT_EQ(score_samples(m, x), hbos_brute_force(x, bins, x)) << bins;
  }
}

TEST(Hbos, AdditiveAcrossFeatures) {
  Rng rng(17);
  const Matrix x = gaussian_rows(rng, 300, 3);
  const Matrix test = gaussian_rows(rng, 20, 3);
  const Vector whole = score_samples(fit_hbos(x, 10, 0.1), test);
  Vector sum = Vector::Zero(20);
  for (Eigen::Index f = 0; f < 3; ++f) sum += score_samples(fit_hbos(x.col(f), 10, 0.1), test.col(f));
  EXPECT_LT((whole - sum).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Hbos, EmptyBinAndPeakBin) {
  Matrix x(4, 1);
  x << 0.0, 0.1, 0.2, 1.0;  // bins of width 0.25: counts 3, 0, 0, 1
  const auto m = fit_hbos(x, 4, 0.1);
  Matrix probe(3, 1);
  probe << 0.05, 0.3, 0.9;
  const Vector s = score_samples(m, probe);
  EXPECT_EQ(s[0], 0.0);
  EXPECT_NEAR(s[1], std::log(1e12), 1e-9);
  EXPECT_NEAR(s[1], 27.63, 5e-3);
  EXPECT_NEAR(s[2], std::log(3.0), 1e-15);
}

TEST(Hbos, ConstantFeatureContributesNothing) {
  Rng rng(18);
  Matrix x = gaussian_rows(rng, 100, 2);
  x.col(1).setConstant(3.0);
  const auto m = fit_hbos(x, 10, 0.1);
  Matrix test = gaussian_rows(rng, 10, 2);
  const Vector a = score_samples(m, test);
  test.col(1).setConstant(-50.0);
  EXPECT_EQ(score_samples(m, test), a);
  EXPECT_THROW(fit_hbos(x, 1, 0.1), std::invalid_argument);
}

TEST(Cblof, TwoBlobsScoreIsDistanceToOwnCentroid) {
  Rng rng(19);
  Matrix x = gaussian_rows(rng, 200, 2, 0.2);
  x.topRows(100).rowwise() += RowVector::Constant(2, 4.0);
  const auto m = fit_cblof(x, 2, 0.1, 1);
  const auto& st = std::get<CblofState>(m.state);
  EXPECT_TRUE(st.is_large[0] && st.is_large[1]);
  const Vector s = score_samples(m, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double d0 = (x.row(i) - st.centroids.row(0)).norm();
    const double d1 = (x.row(i) - st.centroids.row(1)).norm();
    EXPECT_NEAR(s[i], std::min(d0, d1), 1e-12);
  }
  EXPECT_NEAR(score_samples(m, st.centroids.row(0))[0], 0.0, 0.0);
}

TEST(Cblof, SatelliteScoredAgainstNearestLargeCluster) {
  Rng rng(20);
  const Matrix x = blobs_with_satellite(rng);
  const auto m = fit_cblof(x, 3, 0.1, 2);
  const auto& st = std::get<CblofState>(m.state);
  EXPECT_EQ(st.cluster_sizes, (std::vector<int>{50, 50, 3}));
  EXPECT_EQ(st.is_large, (std::vector<bool>{true, true, false}));
  const Vector s = score_samples(m, x);
  std::vector<double> sorted(s.data(), s.data() + s.size());
  std::nth_element(sorted.begin(), sorted.begin() + 51, sorted.end());
  const double median = sorted[51];
  for (Eigen::Index i = 100; i < 103; ++i) {
    const double want = std::min((x.row(i) - st.centroids.row(0)).norm(), (x.row(i) - st.centroids.row(1)).norm());
    EXPECT_NEAR(s[i], want, 1e-12);
    EXPECT_GT(s[i], median);
  }
}

TEST(Cblof, BoundaryRuleAndWeights) {
  Rng rng(21);
  const Matrix x = blobs_with_satellite(rng);
  CblofOptions opt;
  opt.alpha = 0.4;  // the first cluster alone reaches 0.4 N
  const auto m = fit_cblof(x, 3, 0.1, 2, opt);
  EXPECT_EQ(std::get<CblofState>(m.state).is_large, (std::vector<bool>{true, false, false}));
  opt = {};
  opt.use_weights = true;
  const auto w = fit_cblof(x, 3, 0.1, 2, opt);
  const auto u = fit_cblof(x, 3, 0.1, 2);
  const Vector sw = score_samples(w, x.topRows(1));
  const Vector su = score_samples(u, x.topRows(1));
  EXPECT_NEAR(sw[0], 50.0 * su[0], 1e-12);
  EXPECT_THROW(fit_cblof(x, 1, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(fit_cblof(x.topRows(2), 3, 0.1, 1), std::invalid_argument);
}
