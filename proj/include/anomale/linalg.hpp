#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace anomale {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorT = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Dense row-major float64 matrix used throughout the pipeline.
using Matrix = MatrixT<double>;
using Vector = VectorT<double>;
using RowVector = RowVectorT<double>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}
}  // namespace detail

template <typename A, typename B>
auto matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + detail::shape_str(a.rows(), a.cols()) + " * " +
                     detail::shape_str(b.rows(), b.cols()));
  }
  return (a * b).eval();
}

template <typename A, typename B>
auto add(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add: " + detail::shape_str(a.rows(), a.cols()) + " + " +
                     detail::shape_str(b.rows(), b.cols()));
  }
  return (a + b).eval();
}

/// Horizontal concatenation [a | b]; both sides must have the same row count.
template <typename A, typename B>
MatrixT<typename A::Scalar> concat_cols(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: " + detail::shape_str(a.rows(), a.cols()) + " | " +
                     detail::shape_str(b.rows(), b.cols()));
  }
  MatrixT<typename A::Scalar> out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
inline Scalar sigmoid(Scalar x) {
  // Split on sign so exp never overflows.
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return m.unaryExpr([](Scalar x) { return sigmoid(x); }).eval();
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseMax(typename Derived::Scalar(0)).eval();
}

/// Mean over rows, i.e. the column-wise average as a row vector.
template <typename Derived>
RowVectorT<typename Derived::Scalar> mean_of_rows(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() == 0) {
    throw ShapeError("mean_of_rows: matrix has no rows");
  }
  return m.colwise().sum() / static_cast<typename Derived::Scalar>(m.rows());
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Linear-interpolation quantile (numpy "linear" rule) of an unsorted sample.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) {
    throw std::invalid_argument("quantile: empty sample");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("quantile: q outside [0,1]");
  }
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

}  // namespace anomale
