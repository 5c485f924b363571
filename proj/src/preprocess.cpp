#include "anomale/preprocess.hpp"

#include "anomale/log.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace anomale {

namespace {
constexpr int kPreprocessorFormatVersion = 1;

bool is_key_or_port(ColumnRole r) {
  return r == ColumnRole::src_ip || r == ColumnRole::dst_ip || r == ColumnRole::src_port ||
         r == ColumnRole::dst_port;
}
}  // namespace

FlowRecord drop_ports(FlowRecord record) {
  record.src_port.reset();
  record.dst_port.reset();
  return record;
}

FlowTable drop_ports(const FlowTable& table) {
  auto layout = std::make_shared<FeatureLayout>(*table.layout);
  std::erase_if(layout->columns, [](const SchemaColumn& c) {
    return c.role == ColumnRole::src_port || c.role == ColumnRole::dst_port;
  });
  FlowTable out;
  out.layout = std::move(layout);
  out.records.reserve(table.records.size());
  for (const auto& r : table.records) out.records.push_back(drop_ports(r));
  return out;
}

std::string_view to_string(CategoricalEncoding e) {
  return e == CategoricalEncoding::frequency ? "frequency" : "target";
}

CategoricalEncoding parse_categorical_encoding(std::string_view s) {
  if (s == "frequency") return CategoricalEncoding::frequency;
  if (s == "target") return CategoricalEncoding::target;
  throw std::invalid_argument("unknown categorical encoding '" + std::string(s) + "'");
}

FeatureEncoder fit_encoder(const FlowTable& train, CategoricalEncoding encoding) {
  if (train.records.empty()) {
    throw std::invalid_argument("fit_encoder: training table is empty");
  }
  if (encoding == CategoricalEncoding::target && !train.labelled()) {
    throw std::invalid_argument("fit_encoder: target encoding requires labelled training records");
  }
  const auto& layout = *train.layout;
  const double n = static_cast<double>(train.records.size());

  FeatureEncoder enc;
  enc.encoding = encoding;
  for (const auto& c : layout.columns) {
    if (!is_key_or_port(c.role)) enc.feature_names.push_back(c.name);
  }

  for (std::size_t k = 0; k < layout.categorical_names.size(); ++k) {
    std::map<std::string, std::pair<double, double>> stats;  // category -> (count, attacks)
    double total_attacks = 0.0;
    for (const auto& r : train.records) {
      auto& s = stats[r.categorical[k]];
      s.first += 1.0;
      if (r.label && *r.label == FlowLabel::attack) {
        s.second += 1.0;
        total_attacks += 1.0;
      }
    }
    CategoryMap map;
    map.feature = layout.categorical_names[k];
    double weighted = 0.0;
    for (const auto& [category, s] : stats) {
      const double code = encoding == CategoricalEncoding::frequency ? s.first / n : s.second / s.first;
      map.codes.emplace(category, code);
      weighted += s.first * code;
    }
    // Row-weighted mean of the training codes; for target encoding this is the
    // global attack rate.
    map.fallback_code = encoding == CategoricalEncoding::frequency ? weighted / n : total_attacks / n;
    enc.categorical_maps.push_back(std::move(map));
  }
  enc.fitted = true;
  return enc;
}

void Normalizer::apply(Matrix& features) const {
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double norm = features.row(i).norm();
    if (norm > 0.0) features.row(i) /= norm;
  }
}

Matrix transform(const FlowTable& table, const FeatureEncoder& encoder, const Normalizer& normalizer) {
  if (!encoder.fitted) {
    throw std::logic_error("transform: encoder is not fitted");
  }
  const auto& layout = *table.layout;
  if (layout.categorical_names.size() != encoder.categorical_maps.size()) {
    throw std::invalid_argument("transform: encoder was fitted on a different layout");
  }

  // Column plan in encoder output order: (is_categorical, source index).
  std::vector<std::pair<bool, std::size_t>> plan;
  std::size_t cat = 0, num = 0;
  for (const auto& c : layout.columns) {
    if (c.role == ColumnRole::categorical) plan.emplace_back(true, cat++);
    if (c.role == ColumnRole::numeric) plan.emplace_back(false, num++);
  }
  if (plan.size() != encoder.feature_names.size()) {
    throw std::invalid_argument("transform: feature count does not match the fitted encoder");
  }

  Matrix out(static_cast<Eigen::Index>(table.records.size()), static_cast<Eigen::Index>(plan.size()));
  std::size_t replaced = 0;
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    const auto& r = table.records[i];
    for (std::size_t j = 0; j < plan.size(); ++j) {
      const auto [is_cat, src] = plan[j];
      double v = is_cat ? encoder.categorical_maps[src].code(r.categorical[src]) : r.numeric[src];
      if (!std::isfinite(v)) {
        v = 0.0;
        ++replaced;
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  if (replaced > 0) log::debug("transform: replaced ", replaced, " missing/non-finite values with 0");
  normalizer.apply(out);
  return out;
}

std::string serialize_preprocessor(const FeatureEncoder& encoder, const Normalizer& normalizer) {
  nlohmann::json j;
  j["format"] = "anomale.preprocessor";
  j["version"] = kPreprocessorFormatVersion;
  j["encoding"] = to_string(encoder.encoding);
  j["fitted"] = encoder.fitted;
  j["feature_names"] = encoder.feature_names;
  j["normalizer"] = "l2_row";
  (void)normalizer;
  auto& maps = j["categorical_maps"] = nlohmann::json::array();
  for (const auto& m : encoder.categorical_maps) {
    nlohmann::json codes = nlohmann::json::array();
    for (const auto& [category, code] : m.codes) codes.push_back({category, code});
    maps.push_back({{"feature", m.feature}, {"fallback_code", m.fallback_code}, {"codes", codes}});
  }
  return j.dump(1);
}

std::pair<FeatureEncoder, Normalizer> deserialize_preprocessor(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "anomale.preprocessor") {
    throw std::runtime_error("not a preprocessor artifact");
  }
  if (j.at("version").get<int>() != kPreprocessorFormatVersion) {
    throw std::runtime_error("unsupported preprocessor artifact version");
  }
  if (j.at("normalizer").get<std::string>() != "l2_row") {
    throw std::runtime_error("unsupported normalizer kind");
  }
  FeatureEncoder enc;
  enc.encoding = parse_categorical_encoding(j.at("encoding").get<std::string>());
  enc.fitted = j.at("fitted").get<bool>();
  enc.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  for (const auto& m : j.at("categorical_maps")) {
    CategoryMap map;
    map.feature = m.at("feature").get<std::string>();
    map.fallback_code = m.at("fallback_code").get<double>();
    for (const auto& kv : m.at("codes")) map.codes.emplace(kv.at(0).get<std::string>(), kv.at(1).get<double>());
    enc.categorical_maps.push_back(std::move(map));
  }
  return {std::move(enc), Normalizer{}};
}

}  // namespace anomale
