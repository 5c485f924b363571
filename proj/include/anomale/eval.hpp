#pragma once

#include "anomale/flow_ingest.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace anomale {

/// Attack is the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double detection_rate = 0.0;  // attack-class recall
  Confusion counts;
};

Confusion confusion(const std::vector<bool>& anomaly_flags, std::span<const FlowLabel> labels);
Metrics metrics_from_counts(const Confusion& c);
/// Throws std::invalid_argument on length mismatch.
Metrics metrics(const std::vector<bool>& anomaly_flags, std::span<const FlowLabel> labels);

/// F1 = 2TP / (2TP + FP + FN), 0 when the denominator is 0.
double f1_score(std::size_t tp, std::size_t fp, std::size_t fn);

enum class InputKind { raw, embeddings };
std::string_view to_string(InputKind k);

struct ReportRow {
  std::string detector;
  InputKind input = InputKind::raw;
  Metrics metrics;
};

struct EvalReport {
  std::vector<ReportRow> rows;

  const ReportRow* find(std::string_view detector, InputKind input) const;
};

struct ComparisonRow {
  std::string detector;
  Metrics raw;
  Metrics embeddings;
  double delta_accuracy = 0.0;
  double delta_macro_f1 = 0.0;
  double delta_detection_rate = 0.0;
};

/// One row per detector present in both reports, in raw-report order.
/// Inputs hold rows of a single input kind each.
std::vector<ComparisonRow> compare(const EvalReport& raw, const EvalReport& embeddings);

/// Acc / Macro F1 / DR per side in percent, "Raw Features" then "Embeddings".
void write_comparison_table(std::ostream& os, const std::vector<ComparisonRow>& rows, std::string_view title = {});
void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows);
void write_report_csv(std::ostream& os, const EvalReport& report);
void write_report_jsonl(std::ostream& os, const EvalReport& report);

}  // namespace anomale
