#include "anomale/flow_ingest.hpp"

#include "support/netflow_csv.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

using namespace anomale;
using anomale::testkit::CsvRow;
using anomale::testkit::mixed_rows;
using anomale::testkit::netflow_csv;

namespace {
FlowTable parse(const std::string& text, std::string_view schema = "NF-UNSW-NB15-v2") {
  std::istringstream in(text);
  return parse_csv(in, schema);
}

std::size_t count_attacks(const FlowTable& t) {
  return static_cast<std::size_t>(std::count_if(t.records.begin(), t.records.end(), [](const FlowRecord& r) {
    return r.label == FlowLabel::attack;
  }));
}
}  // namespace

TEST(FlowIngest, SchemaHas43FeatureColumns) {
  const auto& s = builtin_schema("NF-UNSW-NB15-v2");
  EXPECT_EQ(s.columns.size(), 43u);
  const auto layout = FeatureLayout::from_schema(s);
  EXPECT_EQ(layout.categorical_names.size(), 3u);
  // 43 minus two IP keys and two ports.
  EXPECT_EQ(layout.edge_feature_dim(), 39u);
  EXPECT_TRUE(layout.has_ports());
}

TEST(FlowIngest, UnknownSchemaIsAnError) {
  EXPECT_THROW(builtin_schema("NF-Nope"), SchemaError);
  EXPECT_THROW(parse(netflow_csv({CsvRow{}}), "NF-Nope"), SchemaError);
}

TEST(FlowIngest, ThreeRowsGiveThreeRecords) {
  const auto t = parse(netflow_csv({CsvRow{}, CsvRow{}, CsvRow{}}));
  ASSERT_EQ(t.size(), 3u);
  EXPECT_TRUE(t.labelled());
  const auto& r = t.records[0];
  EXPECT_EQ(r.src_ip, "10.0.0.1");
  EXPECT_EQ(r.dst_ip, "10.0.0.2");
  ASSERT_TRUE(r.src_port.has_value());
  EXPECT_EQ(*r.src_port, 2);
  EXPECT_EQ(r.categorical, (std::vector<std::string>{"6", "7.0", "27"}));
  EXPECT_EQ(r.numeric.size(), t.layout->numeric_names.size());
  EXPECT_EQ(r.label, FlowLabel::benign);
  EXPECT_EQ(r.attack_type, "Benign");
}

TEST(FlowIngest, NonNumericCellNamesTheRow) {
  auto rows = mixed_rows(4, 0);
  rows[2].cells["IN_PKTS"] = "lots";
  try {
    parse(netflow_csv(rows));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("IN_PKTS"), std::string::npos);
  }
}

TEST(FlowIngest, ShortRowIsMalformed) {
  std::string text = netflow_csv({CsvRow{}, CsvRow{}});
  text += "1.2.3.4,5\n";
  try {
    parse(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
  }
}

TEST(FlowIngest, EmptyNumericCellIsMissing) {
  CsvRow r;
  r.cells["DNS_TTL_ANSWER"] = "";
  const auto t = parse(netflow_csv({r}));
  const auto& names = t.layout->numeric_names;
  const auto k = std::find(names.begin(), names.end(), "DNS_TTL_ANSWER") - names.begin();
  EXPECT_TRUE(std::isnan(t.records[0].numeric[static_cast<std::size_t>(k)]));
}

TEST(FlowIngest, HeaderMayBeReorderedAndLabelsAreOptional) {
  const auto t = parse(netflow_csv({CsvRow{}}, false));
  EXPECT_FALSE(t.labelled());
  EXPECT_FALSE(t.records[0].label.has_value());

  // Swap the first two header names and their cells.
  std::string text = netflow_csv({CsvRow{}});
  std::istringstream in(text);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  auto swap_first_two = [](const std::string& line) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    return line.substr(a + 1, b - a - 1) + "," + line.substr(0, a) + line.substr(b);
  };
  const auto t2 = parse(swap_first_two(header) + "\n" + swap_first_two(row) + "\n");
  EXPECT_EQ(t2.records[0], parse(text).records[0]);
}

TEST(FlowIngest, MissingOrUnknownColumnIsSchemaError) {
  std::string text = netflow_csv({CsvRow{}});
  std::string bad = text;
  bad.replace(bad.find("IN_BYTES"), 8, "IN_BYTEZ");
  EXPECT_THROW(parse(bad), SchemaError);
  std::string extra = text;
  extra.insert(extra.find('\n'), ",EXTRA");
  const auto row_end = extra.find('\n', extra.find('\n') + 1);
  extra.insert(row_end, ",1");
  EXPECT_THROW(parse(extra), SchemaError);
}

TEST(FlowIngest, BadLabelIsParseError) {
  CsvRow r;
  r.label = "maybe";
  EXPECT_THROW(parse(netflow_csv({r})), ParseError);
}

TEST(FlowIngest, DownsampleSizeAndDeterminism) {
  const auto t = parse(netflow_csv(mixed_rows(1000, 10)));
  SplitSpec spec;
  spec.rng_seed = 5;
  const auto a = downsample(t, spec);
  EXPECT_EQ(a.size(), 100u);
  const auto b = downsample(t, spec);
  EXPECT_EQ(a.records, b.records);
  spec.rng_seed = 6;
  EXPECT_NE(downsample(t, spec).records, a.records);

  spec.downsample_fraction = 1.0;
  EXPECT_EQ(downsample(t, spec).records, t.records);
}

TEST(FlowIngest, SplitWithoutContaminationKeepsAttacksOutOfTraining) {
  const auto t = parse(netflow_csv(mixed_rows(100, 5)));
  SplitSpec spec;
  spec.rng_seed = 1;
  const auto s = split(t, spec);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.test.size(), 30u);
  EXPECT_EQ(count_attacks(s.train), 0u);
  EXPECT_EQ(count_attacks(s.test), 20u);
}

TEST(FlowIngest, SplitWithContaminationPlacesCeilFractionOfAttacks) {
  const auto t = parse(netflow_csv(mixed_rows(1000, 5)));
  for (double c : {0.0, 0.01, 0.04, 0.1}) {
    SplitSpec spec;
    spec.rng_seed = 3;
    spec.contamination = ContaminationMode::of(c);
    const auto s = split(t, spec);
    ASSERT_EQ(s.train.size(), 700u);
    EXPECT_EQ(count_attacks(s.train), static_cast<std::size_t>(std::ceil(c * 700 - 1e-9))) << c;
    EXPECT_EQ(count_attacks(s.train) + count_attacks(s.test), 200u);
  }
}

TEST(FlowIngest, SplitIsAPartitionInOriginalOrder) {
  const auto t = parse(netflow_csv(mixed_rows(60, 4)));
  SplitSpec spec;
  spec.train_fraction = 0.5;
  spec.contamination = ContaminationMode::of(0.1);
  const auto s = split(t, spec);
  std::multiset<std::string> all, parts;
  for (const auto& r : t.records) all.insert(r.src_ip + r.dst_ip + std::to_string(r.numeric[0]));
  for (const auto* part : {&s.train, &s.test}) {
    for (const auto& r : part->records) parts.insert(r.src_ip + r.dst_ip + std::to_string(r.numeric[0]));
  }
  EXPECT_EQ(all, parts);
  EXPECT_EQ(split(t, spec).train.records, s.train.records);
}

TEST(FlowIngest, SplitErrorsAreExplicit) {
  const auto heavy = parse(netflow_csv(mixed_rows(10, 1)));  // all attacks
  EXPECT_THROW(split(heavy, SplitSpec{}), std::runtime_error);

  const auto unlabelled = parse(netflow_csv(mixed_rows(10, 0), false));
  SplitSpec spec;
  EXPECT_NO_THROW(split(unlabelled, spec));
  spec.contamination = ContaminationMode::of(0.1);
  EXPECT_THROW(split(unlabelled, spec), std::runtime_error);

  SplitSpec bad;
  bad.train_fraction = 1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = SplitSpec{};
  bad.downsample_fraction = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(FlowIngest, BundledFixtureLoads) {
  const auto t = load_csv(ANOMALE_FIXTURE_DIR "/nf_unsw_nb15_v2_200.csv", "NF-UNSW-NB15-v2");
  EXPECT_EQ(t.size(), 200u);
  EXPECT_EQ(count_attacks(t), 20u);
}

// Full dataset check, run only when the file is provided.
TEST(FlowIngest, FullUnswFileCounts) {
  const char* path = std::getenv("ANOMALE_UNSW_CSV");
  if (path == nullptr) GTEST_SKIP() << "ANOMALE_UNSW_CSV not set";
  const auto t = load_csv(path, "NF-UNSW-NB15-v2");
  EXPECT_EQ(t.size(), 2390275u);
  const double benign = 1.0 - static_cast<double>(count_attacks(t)) / static_cast<double>(t.size());
  EXPECT_NEAR(benign, 0.9602, 5e-5);
}
