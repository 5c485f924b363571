#include "anomale/detectors.hpp"

#include "anomale/log.hpp"
#include "anomale/random.hpp"
#include "detector_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace anomale {
namespace {

Eigen::Index nearest(const Matrix& centroids, const Eigen::Ref<const RowVector>& x, double* dist2 = nullptr) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

Matrix kmeans_plus_plus(const Matrix& x, int k, Rng& rng) {
  const auto n = x.rows();
  Matrix centroids(k, x.cols());
  centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (x.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform01() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2[pick];
        if (target < 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (x.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

struct KMeansResult {
  Matrix centroids;
  std::vector<int> assignment;
};

KMeansResult kmeans(const Matrix& x, int k, int max_iterations, Rng& rng) {
  const auto n = x.rows();
  KMeansResult r{kmeans_plus_plus(x, k, rng), std::vector<int>(static_cast<std::size_t>(n), -1)};
  std::vector<bool> reseeded(static_cast<std::size_t>(k), false);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = static_cast<int>(nearest(r.centroids, x.row(i)));
      if (c != r.assignment[static_cast<std::size_t>(i)]) {
        r.assignment[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = r.assignment[static_cast<std::size_t>(i)];
      sums.row(c) += x.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    bool reseeded_now = false;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        r.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      if (reseeded[static_cast<std::size_t>(c)]) {
        throw std::runtime_error("fit_cblof: cluster " + std::to_string(c) + " stayed empty after re-seeding");
      }
      // Move the empty centroid onto the point farthest from its current centroid.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (x.row(i) - r.centroids.row(r.assignment[static_cast<std::size_t>(i)])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      r.centroids.row(c) = x.row(far);
      reseeded[static_cast<std::size_t>(c)] = true;
      reseeded_now = true;
      log::debug("fit_cblof: re-seeded empty cluster ", c);
    }
    if (!changed && !reseeded_now) break;
  }
  // Final assignment against the final centroids.
  for (Eigen::Index i = 0; i < n; ++i) r.assignment[static_cast<std::size_t>(i)] = static_cast<int>(nearest(r.centroids, x.row(i)));
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int a : r.assignment) ++counts[static_cast<std::size_t>(a)];
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw std::runtime_error("fit_cblof: k-means produced an empty cluster");
    }
  }
  return r;
}

}  // namespace

DetectorModel fit_cblof(const Matrix& x, int n_clusters, double contamination, std::uint64_t seed,
                        const CblofOptions& options) {
  validate_contamination(contamination);
  if (n_clusters < 2 || n_clusters > x.rows()) {
    throw std::invalid_argument("fit_cblof: n_clusters must be in [2, N]");
  }
  Rng rng(mix_seed(seed, 0xC1));
  KMeansResult km = kmeans(x, n_clusters, options.max_iterations, rng);

  std::vector<int> sizes(static_cast<std::size_t>(n_clusters), 0);
  for (int a : km.assignment) ++sizes[static_cast<std::size_t>(a)];
  std::vector<int> order(static_cast<std::size_t>(n_clusters));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sizes[static_cast<std::size_t>(a)] > sizes[static_cast<std::size_t>(b)]; });

  CblofState st;
  st.n_clusters = n_clusters;
  st.alpha = options.alpha;
  st.beta = options.beta;
  st.use_weights = options.use_weights;
  st.seed = seed;
  st.centroids.resize(n_clusters, x.cols());
  for (int i = 0; i < n_clusters; ++i) {
    st.centroids.row(i) = km.centroids.row(order[static_cast<std::size_t>(i)]);
    st.cluster_sizes.push_back(sizes[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }

  // Large clusters are the prefix up to the first index b where the cumulative
  // size reaches alpha*N or the size ratio to the next cluster reaches beta.
  const double n = static_cast<double>(x.rows());
  int boundary = n_clusters;
  double cumulative = 0.0;
  for (int i = 0; i + 1 < n_clusters; ++i) {
    cumulative += st.cluster_sizes[static_cast<std::size_t>(i)];
    const double ratio = static_cast<double>(st.cluster_sizes[static_cast<std::size_t>(i)]) /
                         static_cast<double>(st.cluster_sizes[static_cast<std::size_t>(i + 1)]);
    if (cumulative >= options.alpha * n || ratio >= options.beta) {
      boundary = i + 1;
      break;
    }
  }
  st.is_large.assign(static_cast<std::size_t>(n_clusters), false);
  for (int i = 0; i < boundary; ++i) st.is_large[static_cast<std::size_t>(i)] = true;

  DetectorModel model;
  model.kind = DetectorKind::cblof;
  model.input_dim = static_cast<int>(x.cols());
  model.contamination = contamination;
  model.state = std::move(st);
  detail::set_threshold(model, x);
  return model;
}

namespace detail {

Vector score_with(const CblofState& st, const Matrix& x) {
  Vector scores(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double d2 = 0.0;
    const auto c = nearest(st.centroids, x.row(i), &d2);
    double dist = std::sqrt(d2);
    if (!st.is_large[static_cast<std::size_t>(c)]) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index l = 0; l < st.centroids.rows(); ++l) {
        if (st.is_large[static_cast<std::size_t>(l)]) best = std::min(best, (st.centroids.row(l) - x.row(i)).norm());
      }
      dist = best;
    }
    scores[i] = st.use_weights ? dist * st.cluster_sizes[static_cast<std::size_t>(c)] : dist;
  }
  return scores;
}

}  // namespace detail
}  // namespace anomale
