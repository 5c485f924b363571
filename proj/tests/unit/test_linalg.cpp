#include "anomale/linalg.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace anomale;

TEST(Linalg, MatmulChecksInnerDimension) {
  Matrix a(2, 3), b(2, 2);
  a.setOnes();
  b.setOnes();
  EXPECT_THROW(matmul(a, b), ShapeError);
  Matrix c = Matrix::Ones(3, 4);
  const Matrix p = matmul(a, c);
  EXPECT_EQ(p.rows(), 2);
  EXPECT_EQ(p.cols(), 4);
  EXPECT_DOUBLE_EQ(p(1, 3), 3.0);
}

TEST(Linalg, ConcatColsKeepsBlocks) {
  Matrix a(2, 1), b(2, 2);
  a << 1, 2;
  b << 3, 4, 5, 6;
  const Matrix c = concat_cols(a, b);
  Matrix want(2, 3);
  want << 1, 3, 4, 2, 5, 6;
  EXPECT_EQ(c, want);
  EXPECT_THROW(concat_cols(a, Matrix(3, 1)), ShapeError);
}

TEST(Linalg, SigmoidMatchesDefinitionAndNeverOverflows) {
  for (double x : {-30.0, -2.0, -0.5, 0.0, 0.5, 2.0, 30.0}) {
    EXPECT_NEAR(sigmoid(x), 1.0 / (1.0 + std::exp(-x)), 1e-15) << x;
  }
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  RowVector v(2);
  v << 2.0, 0.0;
  const RowVector s = sigmoid(v);
  EXPECT_NEAR(s[0], 0.8807970779778823, 1e-15);
  EXPECT_EQ(s[1], 0.5);
}

TEST(Linalg, ReluClampsNegatives) {
  Matrix m(1, 3);
  m << -1, 0, 2;
  Matrix want(1, 3);
  want << 0, 0, 2;
  EXPECT_EQ(relu(m), want);
}

TEST(Linalg, MeanOfRows) {
  Matrix m(2, 2);
  m << 1, -1, 3, 1;
  const RowVector mean = mean_of_rows(m);
  EXPECT_EQ(mean[0], 2.0);
  EXPECT_EQ(mean[1], 0.0);
}

TEST(Linalg, AllFiniteSpotsNanAndInf) {
  Matrix m = Matrix::Zero(2, 2);
  EXPECT_TRUE(all_finite(m));
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(all_finite(m));
  m(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(all_finite(m));
}

// numpy.quantile(x, q) with the default linear method, evaluated by hand.
TEST(Linalg, QuantileLinearInterpolation) {
  const std::vector<double> x = {7, 1, 3, 5};
  // sorted 1 3 5 7, position q*(n-1)
  EXPECT_DOUBLE_EQ(quantile(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(x, 1.0), 7.0);
  EXPECT_DOUBLE_EQ(quantile(x, 0.5), 4.0);
  EXPECT_DOUBLE_EQ(quantile(x, 0.9), 6.4);
  EXPECT_DOUBLE_EQ(quantile({2.0}, 0.3), 2.0);
  EXPECT_THROW(quantile({}, 0.5), std::invalid_argument);
}
