#include "anomale/preprocess.hpp"

#include "support/netflow_csv.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace anomale;
using anomale::testkit::CsvRow;
using anomale::testkit::netflow_csv;
using anomale::testkit::netflow_header;

namespace {
FlowTable table_of(const std::vector<CsvRow>& rows) {
  std::istringstream in(netflow_csv(rows));
  return drop_ports(parse_csv(in, "NF-UNSW-NB15-v2"));
}

std::size_t column(const FeatureEncoder& enc, const std::string& name) {
  for (std::size_t i = 0; i < enc.feature_names.size(); ++i) {
    if (enc.feature_names[i] == name) return i;
  }
  throw std::out_of_range(name);
}

std::vector<CsvRow> protocol_rows(const std::vector<std::pair<std::string, std::string>>& proto_label) {
  std::vector<CsvRow> rows;
  for (const auto& [proto, label] : proto_label) {
    CsvRow r;
    r.cells["PROTOCOL"] = proto;
    r.label = label;
    rows.push_back(r);
  }
  return rows;
}
}  // namespace

TEST(Preprocess, DropPortsClearsPortsAndLayout) {
  const auto t = table_of({CsvRow{}});
  EXPECT_FALSE(t.layout->has_ports());
  EXPECT_FALSE(t.records[0].src_port.has_value());
  EXPECT_FALSE(t.records[0].dst_port.has_value());
  EXPECT_EQ(t.records[0].src_ip, "10.0.0.1");
  EXPECT_EQ(t.layout->columns.size(), 41u);
}

TEST(Preprocess, FeatureNamesExcludeKeysAndPorts) {
  const auto enc = fit_encoder(table_of({CsvRow{}}));
  EXPECT_EQ(enc.feature_names.size(), 39u);
  EXPECT_EQ(enc.feature_names.front(), "PROTOCOL");
  EXPECT_EQ(enc.feature_names.back(), "FTP_COMMAND_RET_CODE");
}

// Codes recomputed by counting in the test.
TEST(Preprocess, FrequencyEncodingIsCategoryShare) {
  const auto t = table_of(protocol_rows({{"6", "0"}, {"6", "1"}, {"17", "0"}, {"6", "0"}, {"1", "1"}}));
  const auto enc = fit_encoder(t);
  const auto& m = enc.categorical_maps[0];
  EXPECT_EQ(m.feature, "PROTOCOL");
  EXPECT_DOUBLE_EQ(m.code("6"), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(m.code("17"), 1.0 / 5.0);
  EXPECT_DOUBLE_EQ(m.code("1"), 1.0 / 5.0);
  // unseen -> row-weighted mean of the codes: (3*.6 + .2 + .2) / 5
  EXPECT_DOUBLE_EQ(m.code("99"), (3 * 0.6 + 0.2 + 0.2) / 5.0);
}

TEST(Preprocess, TargetEncodingIsAttackRate) {
  const auto t = table_of(protocol_rows({{"6", "0"}, {"6", "1"}, {"17", "0"}, {"6", "0"}, {"1", "1"}}));
  const auto enc = fit_encoder(t, CategoricalEncoding::target);
  const auto& m = enc.categorical_maps[0];
  EXPECT_DOUBLE_EQ(m.code("6"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.code("17"), 0.0);
  EXPECT_DOUBLE_EQ(m.code("1"), 1.0);
  EXPECT_DOUBLE_EQ(m.code("unseen"), 2.0 / 5.0);
}

TEST(Preprocess, TargetEncodingNeedsLabels) {
  std::istringstream in(netflow_csv({CsvRow{}}, false));
  const auto t = drop_ports(parse_csv(in, "NF-UNSW-NB15-v2"));
  EXPECT_THROW(fit_encoder(t, CategoricalEncoding::target), std::invalid_argument);
  EXPECT_NO_THROW(fit_encoder(t));
}

TEST(Preprocess, NonFiniteBecomesZeroThenRowsHaveUnitNorm) {
  std::vector<CsvRow> rows(3);
  rows[1].cells["IN_BYTES"] = "inf";
  rows[2].cells["IN_PKTS"] = "";
  const auto t = table_of(rows);
  const auto enc = fit_encoder(t);
  const Matrix x = transform(t, enc, Normalizer{});
  ASSERT_EQ(x.rows(), 3);
  ASSERT_EQ(x.cols(), 39);
  EXPECT_TRUE(x.allFinite());
  for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_NEAR(x.row(i).norm(), 1.0, 1e-9);
  EXPECT_EQ(x(1, static_cast<Eigen::Index>(column(enc, "IN_BYTES"))), 0.0);
  EXPECT_EQ(x(2, static_cast<Eigen::Index>(column(enc, "IN_PKTS"))), 0.0);
}

TEST(Preprocess, TransformMatchesHandComputedRow) {
  CsvRow r;
  for (const auto& name : netflow_header(false)) {
    if (name != "IPV4_SRC_ADDR" && name != "IPV4_DST_ADDR") r.cells[name] = "0";
  }
  r.cells["PROTOCOL"] = "6";
  r.cells["L7_PROTO"] = "7.0";
  r.cells["TCP_FLAGS"] = "27";
  r.cells["IN_BYTES"] = "3";
  const auto t = table_of({r});
  const auto enc = fit_encoder(t);
  const Matrix x = transform(t, enc, Normalizer{});
  // Three categorical codes of 1.0 (single row) and IN_BYTES = 3: norm sqrt(12).
  const double norm = std::sqrt(12.0);
  EXPECT_NEAR(x(0, static_cast<Eigen::Index>(column(enc, "PROTOCOL"))), 1.0 / norm, 1e-15);
  EXPECT_NEAR(x(0, static_cast<Eigen::Index>(column(enc, "IN_BYTES"))), 3.0 / norm, 1e-15);
}

TEST(Preprocess, ZeroRowStaysZero) {
  Matrix m = Matrix::Zero(2, 3);
  m(1, 2) = -4.0;
  Normalizer{}.apply(m);
  EXPECT_TRUE(m.row(0).isZero(0.0));
  EXPECT_EQ(m(1, 2), -1.0);
}

TEST(Preprocess, TestRowsUseTrainingMapsOnly) {
  const auto train = table_of(protocol_rows({{"6", "0"}, {"6", "0"}, {"17", "0"}}));
  const auto test = table_of(protocol_rows({{"132", "1"}}));
  const auto enc = fit_encoder(train);
  const auto before = enc;
  const Matrix x = transform(test, enc, Normalizer{});
  EXPECT_EQ(enc, before);
  const double fallback = enc.categorical_maps[0].fallback_code;
  EXPECT_DOUBLE_EQ(fallback, (2 * (2.0 / 3.0) + 1.0 / 3.0) / 3.0);
  EXPECT_GT(x(0, static_cast<Eigen::Index>(column(enc, "PROTOCOL"))), 0.0);
}

TEST(Preprocess, UnfittedEncoderRefusesToTransform) {
  const auto t = table_of({CsvRow{}});
  EXPECT_THROW(transform(t, FeatureEncoder{}, Normalizer{}), std::logic_error);
}

TEST(Preprocess, SerializationRoundTripsBitExact) {
  const auto t = table_of(protocol_rows({{"6", "0"}, {"6", "1"}, {"17", "0"}}));
  const auto enc = fit_encoder(t, CategoricalEncoding::target);
  const std::string text = serialize_preprocessor(enc, Normalizer{});
  const auto [back, norm] = deserialize_preprocessor(text);
  EXPECT_EQ(back, enc);
  EXPECT_EQ(norm, Normalizer{});
  EXPECT_EQ(serialize_preprocessor(back, norm), text);
  EXPECT_EQ(transform(t, back, norm), transform(t, enc, Normalizer{}));
  EXPECT_THROW(deserialize_preprocessor(R"({"format":"other"})"), std::runtime_error);
}

TEST(Preprocess, EncodingNamesParse) {
  EXPECT_EQ(parse_categorical_encoding("target"), CategoricalEncoding::target);
  EXPECT_EQ(to_string(CategoricalEncoding::frequency), "frequency");
  EXPECT_THROW(parse_categorical_encoding("onehot"), std::invalid_argument);
}
