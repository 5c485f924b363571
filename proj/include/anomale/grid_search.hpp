#pragma once

#include "anomale/detectors.hpp"
#include "anomale/eval.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace anomale {

struct GridSpec {
  std::vector<int> pca_components{1, 2, 4, 8, 16};
  std::vector<int> iforest_estimators{50, 100, 200};
  std::vector<int> cblof_clusters{2, 4, 8};
  std::vector<int> hbos_bins{5, 10, 20, 40};
  std::vector<double> contamination{0.01, 0.02, 0.04, 0.08, 0.1, 0.2};

  const std::vector<int>& parameters(DetectorKind kind) const;
  /// Throws std::invalid_argument if any list is empty.
  void validate() const;
};

struct GridCell {
  DetectorKind kind = DetectorKind::pca;
  int parameter = 0;
  double contamination = 0.0;
  Metrics metrics;
  double train_flagged_fraction = 0.0;
  double validation_flagged_fraction = 0.0;
};

struct GridResult {
  DetectorModel best;
  GridCell best_cell;
  std::vector<GridCell> cells;  // parameter-major, contamination-minor
};

using DetectorFitFn = std::function<DetectorModel(const Matrix& train, int parameter, double contamination)>;

/// Exhaustive search over parameters x contaminations, scored by Macro F1 on
/// the labelled validation rows. Ties go to higher DR, then the smaller
/// parameter, then the smaller contamination.
GridResult grid_search(DetectorKind kind, const DetectorFitFn& fit, std::span<const int> parameters,
                       std::span<const double> contaminations, const Matrix& train, const Matrix& validation,
                       std::span<const FlowLabel> validation_labels);

/// Convenience overload for the built-in detectors; parameters that do not
/// fit the data (e.g. PCA components above the rank) are skipped with a warning.
GridResult grid_search(DetectorKind kind, const GridSpec& grid, const Matrix& train, const Matrix& validation,
                       std::span<const FlowLabel> validation_labels, std::uint64_t seed);

/// True when a beats b under the selection order above.
bool better_cell(const GridCell& a, const GridCell& b);

void write_grid_report_csv(std::ostream& os, const std::vector<GridCell>& cells, std::string_view input_kind);

}  // namespace anomale
