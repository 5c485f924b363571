#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace anomale {

enum class FlowLabel { benign, attack };

enum class ColumnRole { src_ip, dst_ip, src_port, dst_port, categorical, numeric };

struct SchemaColumn {
  std::string name;
  ColumnRole role;
};

/// Built-in description of a NetFlow dataset layout.
struct DatasetSchema {
  std::string id;
  std::vector<SchemaColumn> columns;  // feature columns in file order, without label columns
  std::string label_column;
  std::string attack_type_column;

  std::size_t feature_count() const { return columns.size(); }
  std::vector<std::string> names_with_role(ColumnRole role) const;
};

/// Known ids: "NF-UNSW-NB15-v2", "NF-CSE-CIC-IDS2018-v2". Throws SchemaError otherwise.
const DatasetSchema& builtin_schema(std::string_view id);
std::vector<std::string> builtin_schema_ids();

/// Ordered feature names shared by every record of one table; ports are not
/// part of the layout once dropped.
struct FeatureLayout {
  std::string schema_id;
  std::vector<SchemaColumn> columns;  // schema order, IP and port columns included until dropped
  std::vector<std::string> categorical_names;
  std::vector<std::string> numeric_names;

  static FeatureLayout from_schema(const DatasetSchema& schema);
  bool has_ports() const;
  /// Width of the numeric edge-feature vector: every column except IP keys and ports.
  std::size_t edge_feature_dim() const { return categorical_names.size() + numeric_names.size(); }
};

struct FlowRecord {
  std::string src_ip;
  std::string dst_ip;
  std::optional<std::int64_t> src_port;
  std::optional<std::int64_t> dst_port;
  std::vector<std::string> categorical;  // aligned with FeatureLayout::categorical_names
  std::vector<double> numeric;           // aligned with FeatureLayout::numeric_names; NaN = missing
  std::optional<FlowLabel> label;
  std::optional<std::string> attack_type;

  bool operator==(const FlowRecord&) const;
};

struct FlowTable {
  std::shared_ptr<const FeatureLayout> layout;
  std::vector<FlowRecord> records;

  std::size_t size() const { return records.size(); }
  bool labelled() const;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, const std::string& what);
  /// 1-based data row index (header excluded).
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

struct ContaminationMode {
  enum class Kind { none, fraction } kind = Kind::none;
  double fraction = 0.0;

  static ContaminationMode none() { return {}; }
  static ContaminationMode of(double c) { return {Kind::fraction, c}; }
};

struct SplitSpec {
  double downsample_fraction = 0.10;
  double train_fraction = 0.70;
  ContaminationMode contamination;
  std::uint64_t rng_seed = 0;

  /// Throws std::invalid_argument on out-of-range fractions.
  void validate() const;
};

struct TrainTestSplit {
  FlowTable train;
  FlowTable test;
};

FlowTable load_csv(const std::filesystem::path& path, std::string_view schema_id);
FlowTable parse_csv(std::istream& in, std::string_view schema_id);

/// Uniform subset of size round(fraction * N), original order kept.
FlowTable downsample(const FlowTable& table, const SplitSpec& spec);

/// Train/test partition with train size round(train_fraction * N).
TrainTestSplit split(const FlowTable& table, const SplitSpec& spec);

}  // namespace anomale
