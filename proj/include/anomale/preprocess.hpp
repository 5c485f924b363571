#pragma once

#include "anomale/flow_ingest.hpp"
#include "anomale/linalg.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace anomale {

/// Clears the port fields of a record; IP keys and feature payload are untouched.
FlowRecord drop_ports(FlowRecord record);
/// Same for a whole table; the returned layout no longer lists the port columns.
FlowTable drop_ports(const FlowTable& table);

enum class CategoricalEncoding {
  frequency,  // code = share of training rows carrying the category (label-free)
  target,     // code = attack rate of the category in training (needs labels)
};

struct CategoryMap {
  std::string feature;
  std::map<std::string, double> codes;
  double fallback_code = 0.0;

  double code(const std::string& category) const {
    const auto it = codes.find(category);
    return it == codes.end() ? fallback_code : it->second;
  }

  bool operator==(const CategoryMap&) const = default;
};

struct FeatureEncoder {
  CategoricalEncoding encoding = CategoricalEncoding::frequency;
  std::vector<std::string> feature_names;  // output column order
  std::vector<CategoryMap> categorical_maps;
  bool fitted = false;

  bool operator==(const FeatureEncoder&) const = default;
};

struct Normalizer {
  enum class Kind { l2_row } kind = Kind::l2_row;

  bool operator==(const Normalizer&) const = default;
  /// Scales each nonzero row to unit Euclidean norm in place.
  void apply(Matrix& features) const;
};

FeatureEncoder fit_encoder(const FlowTable& train, CategoricalEncoding encoding = CategoricalEncoding::frequency);

/// Rows aligned with table.records, columns = encoder.feature_names. Non-finite
/// values become 0 before normalisation.
Matrix transform(const FlowTable& table, const FeatureEncoder& encoder, const Normalizer& normalizer);

std::string serialize_preprocessor(const FeatureEncoder& encoder, const Normalizer& normalizer);
std::pair<FeatureEncoder, Normalizer> deserialize_preprocessor(std::string_view text);

std::string_view to_string(CategoricalEncoding e);
CategoricalEncoding parse_categorical_encoding(std::string_view s);

}  // namespace anomale
