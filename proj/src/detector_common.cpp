#include "anomale/detectors.hpp"

#include "detector_internal.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace anomale {

std::string_view to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::pca: return "pca";
    case DetectorKind::iforest: return "iforest";
    case DetectorKind::cblof: return "cblof";
    case DetectorKind::hbos: return "hbos";
  }
  return "";
}

DetectorKind parse_detector_kind(std::string_view s) {
  for (auto k : kAllDetectors) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown detector kind '" + std::string(s) + "'");
}

int DetectorModel::primary_parameter() const {
  return std::visit(
      [](const auto& s) -> int {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, PcaState>) return s.n_components;
        if constexpr (std::is_same_v<S, IForestState>) return s.n_estimators;
        if constexpr (std::is_same_v<S, CblofState>) return s.n_clusters;
        if constexpr (std::is_same_v<S, HbosState>) return s.n_bins;
      },
      state);
}

void validate_contamination(double contamination) {
  if (!(contamination > 0.0 && contamination <= 0.5)) {
    throw std::invalid_argument("contamination must be in (0, 0.5], got " + std::to_string(contamination));
  }
}

double contamination_threshold(std::span<const double> train_scores, double contamination) {
  validate_contamination(contamination);
  return quantile(std::vector<double>(train_scores.begin(), train_scores.end()), 1.0 - contamination);
}

DetectorModel rethreshold(const DetectorModel& model, std::span<const double> train_scores, double contamination) {
  DetectorModel out = model;
  out.contamination = contamination;
  out.threshold = contamination_threshold(train_scores, contamination);
  return out;
}

DetectorModel fit_detector(DetectorKind kind, const Matrix& x, int parameter, double contamination,
                           std::uint64_t seed) {
  switch (kind) {
    case DetectorKind::pca: return fit_pca(x, parameter, contamination);
    case DetectorKind::iforest: return fit_iforest(x, parameter, contamination, seed);
    case DetectorKind::cblof: return fit_cblof(x, parameter, contamination, seed);
    case DetectorKind::hbos: return fit_hbos(x, parameter, contamination);
  }
  throw std::invalid_argument("fit_detector: bad kind");
}

Prediction predict(const DetectorModel& model, const Matrix& x) {
  Prediction p;
  p.scores = score_samples(model, x);
  p.anomaly.resize(static_cast<std::size_t>(p.scores.size()));
  for (Eigen::Index i = 0; i < p.scores.size(); ++i) {
    p.anomaly[static_cast<std::size_t>(i)] = p.scores[i] >= model.threshold;
  }
  return p;
}

namespace {

using nlohmann::json;

json to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw std::runtime_error("detector: bad matrix payload");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

template <typename V>
std::vector<double> to_std(const V& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const json& j) {
  const auto d = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size()));
}

RowVector row_from_json(const json& j) { return vector_from_json(j).transpose(); }

}  // namespace

std::string serialize_detector(const DetectorModel& model) {
  json j;
  j["format"] = "anomale.detector";
  j["version"] = 1;
  j["kind"] = to_string(model.kind);
  j["input_dim"] = model.input_dim;
  j["contamination"] = model.contamination;
  j["threshold"] = model.threshold;
  json s;
  std::visit(
      [&s](const auto& st) {
        using S = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<S, PcaState>) {
          s = {{"n_components", st.n_components}, {"kept_columns", st.kept_columns}, {"mean", to_std(st.mean)},
               {"scale", to_std(st.scale)},       {"components", to_json(st.components)},
               {"eigenvalues", to_std(st.eigenvalues)}};
        } else if constexpr (std::is_same_v<S, IForestState>) {
          json trees = json::array();
          for (const auto& t : st.trees) {
            json nodes = json::array();
            for (const auto& n : t.nodes) nodes.push_back({n.feature, n.split, n.left, n.right, n.size});
            trees.push_back(std::move(nodes));
          }
          s = {{"n_estimators", st.n_estimators}, {"subsample_size", st.subsample_size},
               {"height_limit", st.height_limit}, {"seed", st.seed},
               {"trees", std::move(trees)}};
        } else if constexpr (std::is_same_v<S, CblofState>) {
          s = {{"n_clusters", st.n_clusters}, {"alpha", st.alpha},
               {"beta", st.beta},             {"use_weights", st.use_weights},
               {"seed", st.seed},             {"centroids", to_json(st.centroids)},
               {"cluster_sizes", st.cluster_sizes}, {"is_large", std::vector<bool>(st.is_large)}};
        } else {
          json hists = json::array();
          for (const auto& h : st.histograms) {
            hists.push_back({{"min", h.min}, {"max", h.max}, {"constant", h.constant}, {"heights", to_std(h.heights)}});
          }
          s = {{"n_bins", st.n_bins}, {"histograms", std::move(hists)}};
        }
      },
      model.state);
  j["state"] = std::move(s);
  return j.dump(1);
}

DetectorModel deserialize_detector(std::string_view text) {
  const auto j = json::parse(text);
  if (j.value("format", "") != "anomale.detector" || j.value("version", 0) != 1) {
    throw std::runtime_error("not a version-1 detector artifact");
  }
  DetectorModel m;
  m.kind = parse_detector_kind(j.at("kind").get<std::string>());
  m.input_dim = j.at("input_dim").get<int>();
  m.contamination = j.at("contamination").get<double>();
  m.threshold = j.at("threshold").get<double>();
  const auto& s = j.at("state");
  switch (m.kind) {
    case DetectorKind::pca: {
      PcaState st;
      st.n_components = s.at("n_components").get<int>();
      st.kept_columns = s.at("kept_columns").get<std::vector<int>>();
      st.mean = row_from_json(s.at("mean"));
      st.scale = row_from_json(s.at("scale"));
      st.components = matrix_from_json(s.at("components"));
      st.eigenvalues = vector_from_json(s.at("eigenvalues"));
      m.state = std::move(st);
      break;
    }
    case DetectorKind::iforest: {
      IForestState st;
      st.n_estimators = s.at("n_estimators").get<int>();
      st.subsample_size = s.at("subsample_size").get<int>();
      st.height_limit = s.at("height_limit").get<int>();
      st.seed = s.at("seed").get<std::uint64_t>();
      for (const auto& t : s.at("trees")) {
        IsolationTree tree;
        for (const auto& n : t) {
          tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                                n.at(4).get<int>()});
        }
        st.trees.push_back(std::move(tree));
      }
      m.state = std::move(st);
      break;
    }
    case DetectorKind::cblof: {
      CblofState st;
      st.n_clusters = s.at("n_clusters").get<int>();
      st.alpha = s.at("alpha").get<double>();
      st.beta = s.at("beta").get<double>();
      st.use_weights = s.at("use_weights").get<bool>();
      st.seed = s.at("seed").get<std::uint64_t>();
      st.centroids = matrix_from_json(s.at("centroids"));
      st.cluster_sizes = s.at("cluster_sizes").get<std::vector<int>>();
      st.is_large = s.at("is_large").get<std::vector<bool>>();
      m.state = std::move(st);
      break;
    }
    case DetectorKind::hbos: {
      HbosState st;
      st.n_bins = s.at("n_bins").get<int>();
      for (const auto& h : s.at("histograms")) {
        st.histograms.push_back({h.at("min").get<double>(), h.at("max").get<double>(),
                                 h.at("constant").get<bool>(), vector_from_json(h.at("heights"))});
      }
      m.state = std::move(st);
      break;
    }
  }
  return m;
}

Vector score_samples(const DetectorModel& model, const Matrix& x) {
  if (x.rows() > 0 && x.cols() != model.input_dim) {
    throw ShapeError("score_samples: model expects width " + std::to_string(model.input_dim) + ", got " +
                     std::to_string(x.cols()));
  }
  if (x.rows() == 0) return Vector(0);
  return std::visit([&x](const auto& st) { return detail::score_with(st, x); }, model.state);
}

}  // namespace anomale

namespace anomale::detail {

void set_threshold(DetectorModel& model, const Matrix& train) {
  const Vector scores = score_samples(model, train);
  model.threshold = contamination_threshold({scores.data(), static_cast<std::size_t>(scores.size())},
                                            model.contamination);
}

}  // namespace anomale::detail
