#include "anomale/grid_search.hpp"

#include "anomale/log.hpp"

#include <cstdio>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace anomale {

const std::vector<int>& GridSpec::parameters(DetectorKind kind) const {
  switch (kind) {
    case DetectorKind::pca: return pca_components;
    case DetectorKind::iforest: return iforest_estimators;
    case DetectorKind::cblof: return cblof_clusters;
    case DetectorKind::hbos: return hbos_bins;
  }
  throw std::invalid_argument("GridSpec: bad detector kind");
}

void GridSpec::validate() const {
  if (contamination.empty()) throw std::invalid_argument("grid: contamination list is empty");
  for (auto k : kAllDetectors) {
    if (parameters(k).empty()) {
      throw std::invalid_argument("grid: parameter list for " + std::string(to_string(k)) + " is empty");
    }
  }
  for (double c : contamination) validate_contamination(c);
}

bool better_cell(const GridCell& a, const GridCell& b) {
  if (a.metrics.macro_f1 != b.metrics.macro_f1) return a.metrics.macro_f1 > b.metrics.macro_f1;
  if (a.metrics.detection_rate != b.metrics.detection_rate) return a.metrics.detection_rate > b.metrics.detection_rate;
  if (a.parameter != b.parameter) return a.parameter < b.parameter;
  return a.contamination < b.contamination;
}

namespace {
double flagged_fraction(const std::vector<bool>& flags) {
  if (flags.empty()) return 0.0;
  std::size_t n = 0;
  for (bool f : flags) n += f ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(flags.size());
}
}  // namespace

GridResult grid_search(DetectorKind kind, const DetectorFitFn& fit, std::span<const int> parameters,
                       std::span<const double> contaminations, const Matrix& train, const Matrix& validation,
                       std::span<const FlowLabel> validation_labels) {
  if (parameters.empty() || contaminations.empty()) throw std::invalid_argument("grid_search: empty grid");
  if (static_cast<std::size_t>(validation.rows()) != validation_labels.size()) {
    throw std::invalid_argument("grid_search: validation rows and labels differ in length");
  }

  GridResult result;
  std::optional<std::size_t> best_index;
  std::vector<DetectorModel> best_model;
  for (int param : parameters) {
    // The fitted state does not depend on contamination; only the threshold does.
    const DetectorModel base = fit(train, param, contaminations.front());
    const Vector train_scores = score_samples(base, train);
    const Vector val_scores = score_samples(base, validation);
    const std::span<const double> ts(train_scores.data(), static_cast<std::size_t>(train_scores.size()));
    for (double c : contaminations) {
      const DetectorModel model = rethreshold(base, ts, c);
      std::vector<bool> train_flags(ts.size()), val_flags(static_cast<std::size_t>(val_scores.size()));
      for (std::size_t i = 0; i < ts.size(); ++i) train_flags[i] = ts[i] >= model.threshold;
      for (std::size_t i = 0; i < val_flags.size(); ++i) {
        val_flags[i] = val_scores[static_cast<Eigen::Index>(i)] >= model.threshold;
      }
      GridCell cell;
      cell.kind = kind;
      cell.parameter = param;
      cell.contamination = c;
      cell.metrics = metrics(val_flags, validation_labels);
      cell.train_flagged_fraction = flagged_fraction(train_flags);
      cell.validation_flagged_fraction = flagged_fraction(val_flags);
      result.cells.push_back(cell);
      if (!best_index || better_cell(cell, result.cells[*best_index])) {
        best_index = result.cells.size() - 1;
        best_model = {model};
      }
    }
  }
  result.best_cell = result.cells[*best_index];
  result.best = std::move(best_model.front());
  return result;
}

GridResult grid_search(DetectorKind kind, const GridSpec& grid, const Matrix& train, const Matrix& validation,
                       std::span<const FlowLabel> validation_labels, std::uint64_t seed) {
  grid.validate();
  std::vector<int> usable;
  for (int p : grid.parameters(kind)) {
    if (kind == DetectorKind::pca && p > train.cols()) {
      log::warn("grid: skipping pca n_components=", p, " (feature width ", train.cols(), ")");
      continue;
    }
    if (kind == DetectorKind::cblof && p > train.rows()) {
      log::warn("grid: skipping cblof n_clusters=", p, " (only ", train.rows(), " rows)");
      continue;
    }
    usable.push_back(p);
  }
  // PCA components above the rank only show up at fit time.
  if (kind == DetectorKind::pca) {
    std::vector<int> ok;
    for (int p : usable) {
      try {
        fit_pca(train, p, grid.contamination.front());
        ok.push_back(p);
      } catch (const std::invalid_argument& e) {
        log::warn("grid: skipping pca n_components=", p, ": ", e.what());
      }
    }
    usable = std::move(ok);
  }
  if (usable.empty()) throw std::invalid_argument("grid_search: no usable parameter values for " + std::string(to_string(kind)));
  const DetectorFitFn fit = [kind, seed](const Matrix& x, int p, double c) { return fit_detector(kind, x, p, c, seed); };
  return grid_search(kind, fit, usable, grid.contamination, train, validation, validation_labels);
}

void write_grid_report_csv(std::ostream& os, const std::vector<GridCell>& cells, std::string_view input_kind) {
  for (const auto& c : cells) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", std::string(to_string(c.kind)).c_str(),
                  std::string(input_kind).c_str(), c.parameter, c.contamination, c.metrics.accuracy,
                  c.metrics.macro_f1, c.metrics.detection_rate, c.train_flagged_fraction,
                  c.validation_flagged_fraction);
    os << buf;
  }
}

}  // namespace anomale
