#include "anomale/detectors.hpp"

#include "anomale/random.hpp"
#include "detector_internal.hpp"

#include <cmath>
#include <stdexcept>

namespace anomale {

double average_path_length(double n) {
  constexpr double kEulerGamma = 0.5772156649;
  if (n <= 1.0) return 0.0;
  if (n <= 2.0) return 1.0;  // 2 H(1) - 1 with H(1) = 1 exactly
  return 2.0 * (std::log(n - 1.0) + kEulerGamma) - 2.0 * (n - 1.0) / n;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, int height_limit, Rng& rng) : x_(x), limit_(height_limit), rng_(rng) {}

  IsolationTree build(std::vector<Eigen::Index> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<Eigen::Index> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[id].size = static_cast<int>(rows.size());
    if (depth >= limit_ || rows.size() <= 1) return id;

    // Only features that still vary inside this node can split it.
    std::vector<std::pair<int, std::pair<double, double>>> candidates;
    for (Eigen::Index f = 0; f < x_.cols(); ++f) {
      double lo = x_(rows[0], f), hi = lo;
      for (auto r : rows) {
        lo = std::min(lo, x_(r, f));
        hi = std::max(hi, x_(r, f));
      }
      if (hi > lo) candidates.push_back({static_cast<int>(f), {lo, hi}});
    }
    if (candidates.empty()) return id;

    const auto& [feature, range] = candidates[rng_.uniform_index(candidates.size())];
    double split = rng_.uniform(range.first, range.second);
    if (split <= range.first) split = range.second;  // keep both sides nonempty

    std::vector<Eigen::Index> left, right;
    for (auto r : rows) (x_(r, feature) < split ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = tree_.nodes[id];
    node.feature = feature;
    node.split = split;
    node.left = l;
    node.right = r;
    return id;
  }

  const Matrix& x_;
  int limit_;
  Rng& rng_;
  IsolationTree tree_;
};

double path_length(const IsolationTree& tree, const Eigen::Ref<const RowVector>& x) {
  int id = 0;
  int depth = 0;
  while (tree.nodes[id].feature >= 0) {
    const auto& n = tree.nodes[id];
    id = x[n.feature] < n.split ? n.left : n.right;
    ++depth;
  }
  return depth + average_path_length(tree.nodes[id].size);
}

}  // namespace

DetectorModel fit_iforest(const Matrix& x, int n_estimators, double contamination, std::uint64_t seed) {
  validate_contamination(contamination);
  if (x.rows() < 2) throw std::invalid_argument("fit_iforest: need at least 2 training rows");
  if (n_estimators < 1) throw std::invalid_argument("fit_iforest: n_estimators must be >= 1");

  IForestState st;
  st.n_estimators = n_estimators;
  st.subsample_size = static_cast<int>(std::min<Eigen::Index>(256, x.rows()));
  st.height_limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(st.subsample_size))));
  st.seed = seed;
  for (int t = 0; t < n_estimators; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    const auto picked = rng.sample_without_replacement(static_cast<std::size_t>(x.rows()),
                                                       static_cast<std::size_t>(st.subsample_size));
    std::vector<Eigen::Index> rows(picked.begin(), picked.end());
    TreeBuilder builder(x, st.height_limit, rng);
    st.trees.push_back(builder.build(std::move(rows)));
  }

  DetectorModel model;
  model.kind = DetectorKind::iforest;
  model.input_dim = static_cast<int>(x.cols());
  model.contamination = contamination;
  model.state = std::move(st);
  detail::set_threshold(model, x);
  return model;
}

namespace detail {

Vector score_with(const IForestState& st, const Matrix& x) {
  const double norm = average_path_length(st.subsample_size);
  Vector scores(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double total = 0.0;
    for (const auto& tree : st.trees) total += path_length(tree, x.row(i));
    const double mean_depth = total / static_cast<double>(st.trees.size());
    scores[i] = std::pow(2.0, -mean_depth / norm);
  }
  return scores;
}

}  // namespace detail
}  // namespace anomale
