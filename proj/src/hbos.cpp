#include "anomale/detectors.hpp"

#include "detector_internal.hpp"

#include <cmath>
#include <stdexcept>

namespace anomale {

int HbosHistogram::bin_of(double x) const {
  const auto bins = static_cast<int>(heights.size());
  if (constant || bins == 0) return 0;
  const double width = (max - min) / bins;
  const double pos = std::floor((x - min) / width);
  if (!(pos >= 0.0)) return 0;  // also catches NaN
  return pos >= bins ? bins - 1 : static_cast<int>(pos);
}

DetectorModel fit_hbos(const Matrix& x, int n_bins, double contamination) {
  validate_contamination(contamination);
  if (n_bins < 2) throw std::invalid_argument("fit_hbos: n_bins must be >= 2");
  if (x.rows() < 1) throw std::invalid_argument("fit_hbos: empty training set");

  HbosState st;
  st.n_bins = n_bins;
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    HbosHistogram h;
    h.min = x.col(f).minCoeff();
    h.max = x.col(f).maxCoeff();
    h.constant = !(h.max > h.min);
    if (h.constant) {
      h.heights = Vector::Ones(1);
    } else {
      h.heights = Vector::Zero(n_bins);
      for (Eigen::Index i = 0; i < x.rows(); ++i) h.heights[h.bin_of(x(i, f))] += 1.0;
      h.heights /= h.heights.maxCoeff();
    }
    st.histograms.push_back(std::move(h));
  }

  DetectorModel model;
  model.kind = DetectorKind::hbos;
  model.input_dim = static_cast<int>(x.cols());
  model.contamination = contamination;
  model.state = std::move(st);
  detail::set_threshold(model, x);
  return model;
}

namespace detail {

Vector score_with(const HbosState& st, const Matrix& x) {
  Vector scores = Vector::Zero(x.rows());
  for (std::size_t f = 0; f < st.histograms.size(); ++f) {
    const auto& h = st.histograms[f];
    if (h.constant) continue;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double density = std::max(h.heights[h.bin_of(x(i, static_cast<Eigen::Index>(f)))], kHbosDensityFloor);
      scores[i] += std::log(1.0 / density);
    }
  }
  return scores;
}

}  // namespace detail
}  // namespace anomale
