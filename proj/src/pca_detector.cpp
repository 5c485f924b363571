#include "anomale/detectors.hpp"

#include "anomale/log.hpp"
#include "detector_internal.hpp"

#include <cmath>
#include <stdexcept>

namespace anomale {

DetectorModel fit_pca(const Matrix& x, int n_components, double contamination) {
  validate_contamination(contamination);
  if (x.rows() < 2) throw std::invalid_argument("fit_pca: need at least 2 training rows");
  if (n_components < 1 || n_components > x.cols()) {
    throw std::invalid_argument("fit_pca: n_components must be in [1, " + std::to_string(x.cols()) + "]");
  }
  const double n = static_cast<double>(x.rows());
  const RowVector mean = x.colwise().mean();
  const RowVector stddev = ((x.rowwise() - mean).colwise().squaredNorm() / (n - 1.0)).cwiseSqrt();

  PcaState st;
  st.n_components = n_components;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (stddev[j] > 1e-12 * std::max(1.0, std::abs(mean[j]))) {
      st.kept_columns.push_back(static_cast<int>(j));
    }
  }
  const auto dropped = x.cols() - static_cast<Eigen::Index>(st.kept_columns.size());
  if (dropped > 0) log::warn("fit_pca: dropped ", dropped, " zero-variance column(s)");
  const auto kept = static_cast<Eigen::Index>(st.kept_columns.size());
  if (kept == 0) throw std::invalid_argument("fit_pca: every column has zero variance");

  st.mean.resize(kept);
  st.scale.resize(kept);
  Matrix z(x.rows(), kept);
  for (Eigen::Index j = 0; j < kept; ++j) {
    const int src = st.kept_columns[static_cast<std::size_t>(j)];
    st.mean[j] = mean[src];
    st.scale[j] = stddev[src];
    z.col(j) = (x.col(src).array() - mean[src]) / stddev[src];
  }
  const Matrix correlation = (z.transpose() * z) / (n - 1.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(correlation);
  if (eig.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigendecomposition failed");

  // Eigen returns ascending order.
  const Vector& values = eig.eigenvalues();
  const double largest = values[kept - 1];
  const double tol = std::max(largest, 0.0) * static_cast<double>(kept) * 1e-12;
  int rank = 0;
  for (Eigen::Index i = 0; i < kept; ++i) rank += values[i] > tol ? 1 : 0;
  if (n_components > rank) {
    throw std::invalid_argument("fit_pca: n_components " + std::to_string(n_components) +
                                " exceeds the rank " + std::to_string(rank) + " of the training correlation matrix");
  }
  st.components.resize(kept, n_components);
  st.eigenvalues.resize(n_components);
  for (int i = 0; i < n_components; ++i) {
    st.components.col(i) = eig.eigenvectors().col(kept - 1 - i);
    st.eigenvalues[i] = values[kept - 1 - i];
  }

  DetectorModel model;
  model.kind = DetectorKind::pca;
  model.input_dim = static_cast<int>(x.cols());
  model.contamination = contamination;
  model.state = std::move(st);
  detail::set_threshold(model, x);
  return model;
}

namespace detail {

Vector score_with(const PcaState& st, const Matrix& x) {
  const auto kept = static_cast<Eigen::Index>(st.kept_columns.size());
  Matrix z(x.rows(), kept);
  for (Eigen::Index j = 0; j < kept; ++j) {
    z.col(j) = (x.col(st.kept_columns[static_cast<std::size_t>(j)]).array() - st.mean[j]) / st.scale[j];
  }
  const Matrix y = z * st.components;
  return (y.array().square().rowwise() / st.eigenvalues.transpose().array()).rowwise().sum();
}

}  // namespace detail
}  // namespace anomale
