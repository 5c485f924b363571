#pragma once

#include "anomale/linalg.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace anomale {

enum class DetectorKind { pca, iforest, cblof, hbos };

std::string_view to_string(DetectorKind k);
DetectorKind parse_detector_kind(std::string_view s);
inline constexpr DetectorKind kAllDetectors[] = {DetectorKind::pca, DetectorKind::iforest, DetectorKind::cblof,
                                                 DetectorKind::hbos};

/// Standardised principal-component score over the top-q components of the
/// training correlation matrix: sum_i y_i^2 / lambda_i.
struct PcaState {
  int n_components = 0;
  std::vector<int> kept_columns;  // zero-variance columns are dropped
  RowVector mean;                 // over kept columns
  RowVector scale;                // sample standard deviation over kept columns
  Matrix components;              // [kept x q], columns are unit eigenvectors
  Vector eigenvalues;             // [q], descending
};

struct IsolationNode {
  int feature = -1;  // -1 marks a leaf
  double split = 0.0;
  int left = -1;
  int right = -1;
  int size = 0;  // training samples that reached a leaf

  bool operator==(const IsolationNode&) const = default;
};

struct IsolationTree {
  std::vector<IsolationNode> nodes;  // nodes[0] is the root
};

struct IForestState {
  int n_estimators = 0;
  int subsample_size = 0;
  int height_limit = 0;
  std::uint64_t seed = 0;
  std::vector<IsolationTree> trees;
};

struct CblofState {
  int n_clusters = 0;
  double alpha = 0.9;
  double beta = 5.0;
  bool use_weights = false;
  std::uint64_t seed = 0;
  Matrix centroids;               // [k x d], sorted by descending cluster size
  std::vector<int> cluster_sizes;
  std::vector<bool> is_large;
};

struct HbosHistogram {
  double min = 0.0;
  double max = 0.0;
  bool constant = false;
  Vector heights;  // normalised so the tallest bin is 1

  int bin_of(double x) const;
};

struct HbosState {
  int n_bins = 0;
  std::vector<HbosHistogram> histograms;
};

inline constexpr double kHbosDensityFloor = 1e-12;

struct DetectorModel {
  DetectorKind kind = DetectorKind::pca;
  int input_dim = 0;
  double contamination = 0.1;
  double threshold = 0.0;  // (1 - contamination)-quantile of training scores
  std::variant<PcaState, IForestState, CblofState, HbosState> state;

  /// The grid parameter of this kind (components, estimators, clusters, bins).
  int primary_parameter() const;
};

struct CblofOptions {
  double alpha = 0.9;
  double beta = 5.0;
  bool use_weights = false;
  int max_iterations = 100;
};

DetectorModel fit_pca(const Matrix& x, int n_components, double contamination);
DetectorModel fit_iforest(const Matrix& x, int n_estimators, double contamination, std::uint64_t seed);
DetectorModel fit_cblof(const Matrix& x, int n_clusters, double contamination, std::uint64_t seed,
                        const CblofOptions& options = {});
DetectorModel fit_hbos(const Matrix& x, int n_bins, double contamination);

/// Dispatch on kind; seed is ignored by the deterministic detectors.
DetectorModel fit_detector(DetectorKind kind, const Matrix& x, int parameter, double contamination,
                           std::uint64_t seed);

/// Anomaly scores, higher = more anomalous. Throws ShapeError on width mismatch.
Vector score_samples(const DetectorModel& model, const Matrix& x);

struct Prediction {
  Vector scores;
  std::vector<bool> anomaly;  // score >= threshold
};

Prediction predict(const DetectorModel& model, const Matrix& x);

/// Threshold for a contamination level from training scores.
double contamination_threshold(std::span<const double> train_scores, double contamination);
void validate_contamination(double contamination);
/// Copy of the model thresholded for another contamination level.
DetectorModel rethreshold(const DetectorModel& model, std::span<const double> train_scores, double contamination);

/// Isolation-forest normaliser c(n): average unsuccessful-search path length.
double average_path_length(double n);

std::string serialize_detector(const DetectorModel& model);
DetectorModel deserialize_detector(std::string_view text);

}  // namespace anomale
