#include "anomale/flow_ingest.hpp"

#include "anomale/log.hpp"
#include "anomale/random.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace anomale {
namespace {

// NetFlow v2 standard feature set shared by both NF-*-v2 datasets.
std::vector<SchemaColumn> netflow_v2_columns() {
  using R = ColumnRole;
  return {
      {"IPV4_SRC_ADDR", R::src_ip},
      {"L4_SRC_PORT", R::src_port},
      {"IPV4_DST_ADDR", R::dst_ip},
      {"L4_DST_PORT", R::dst_port},
      {"PROTOCOL", R::categorical},
      {"L7_PROTO", R::categorical},
      {"IN_BYTES", R::numeric},
      {"IN_PKTS", R::numeric},
      {"OUT_BYTES", R::numeric},
      {"OUT_PKTS", R::numeric},
      {"TCP_FLAGS", R::categorical},
      {"CLIENT_TCP_FLAGS", R::numeric},
      {"SERVER_TCP_FLAGS", R::numeric},
      {"FLOW_DURATION_MILLISECONDS", R::numeric},
      {"DURATION_IN", R::numeric},
      {"DURATION_OUT", R::numeric},
      {"MIN_TTL", R::numeric},
      {"MAX_TTL", R::numeric},
      {"LONGEST_FLOW_PKT", R::numeric},
      {"SHORTEST_FLOW_PKT", R::numeric},
      {"MIN_IP_PKT_LEN", R::numeric},
      {"MAX_IP_PKT_LEN", R::numeric},
      {"SRC_TO_DST_SECOND_BYTES", R::numeric},
      {"DST_TO_SRC_SECOND_BYTES", R::numeric},
      {"RETRANSMITTED_IN_BYTES", R::numeric},
      {"RETRANSMITTED_IN_PKTS", R::numeric},
      {"RETRANSMITTED_OUT_BYTES", R::numeric},
      {"RETRANSMITTED_OUT_PKTS", R::numeric},
      {"SRC_TO_DST_AVG_THROUGHPUT", R::numeric},
      {"DST_TO_SRC_AVG_THROUGHPUT", R::numeric},
      {"NUM_PKTS_UP_TO_128_BYTES", R::numeric},
      {"NUM_PKTS_128_TO_256_BYTES", R::numeric},
      {"NUM_PKTS_256_TO_512_BYTES", R::numeric},
      {"NUM_PKTS_512_TO_1024_BYTES", R::numeric},
      {"NUM_PKTS_1024_TO_1514_BYTES", R::numeric},
      {"TCP_WIN_MAX_IN", R::numeric},
      {"TCP_WIN_MAX_OUT", R::numeric},
      {"ICMP_TYPE", R::numeric},
      {"ICMP_IPV4_TYPE", R::numeric},
      {"DNS_QUERY_ID", R::numeric},
      {"DNS_QUERY_TYPE", R::numeric},
      {"DNS_TTL_ANSWER", R::numeric},
      {"FTP_COMMAND_RET_CODE", R::numeric},
  };
}

const std::vector<DatasetSchema>& registry() {
  static const std::vector<DatasetSchema> schemas = {
      {"NF-UNSW-NB15-v2", netflow_v2_columns(), "Label", "Attack"},
      {"NF-CSE-CIC-IDS2018-v2", netflow_v2_columns(), "Label", "Attack"},
  };
  return schemas;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

// NetFlow exports are unquoted; double-quoted cells are accepted without
// embedded-quote escaping.
std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i < line.size() && line[i] == '"') {
      quoted = !quoted;
      continue;
    }
    if (i == line.size() || (line[i] == ',' && !quoted)) {
      auto cell = trim(line.substr(start, i - start));
      if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') {
        cell = cell.substr(1, cell.size() - 2);
      }
      cells.push_back(cell);
      start = i + 1;
    }
  }
  return cells;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::optional<FlowLabel> parse_label(std::string_view s, std::size_t row) {
  if (s.empty()) return std::nullopt;
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "0" || lower == "benign") return FlowLabel::benign;
  if (lower == "1" || lower == "attack") return FlowLabel::attack;
  throw ParseError(row, "label value '" + lower + "' is not 0/1");
}

}  // namespace

std::vector<std::string> DatasetSchema::names_with_role(ColumnRole role) const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c.role == role) out.push_back(c.name);
  }
  return out;
}

const DatasetSchema& builtin_schema(std::string_view id) {
  for (const auto& s : registry()) {
    if (s.id == id) return s;
  }
  throw SchemaError("unknown dataset schema '" + std::string(id) + "'");
}

std::vector<std::string> builtin_schema_ids() {
  std::vector<std::string> ids;
  for (const auto& s : registry()) ids.push_back(s.id);
  return ids;
}

FeatureLayout FeatureLayout::from_schema(const DatasetSchema& schema) {
  FeatureLayout layout;
  layout.schema_id = schema.id;
  layout.columns = schema.columns;
  layout.categorical_names = schema.names_with_role(ColumnRole::categorical);
  layout.numeric_names = schema.names_with_role(ColumnRole::numeric);
  return layout;
}

bool FeatureLayout::has_ports() const {
  return std::any_of(columns.begin(), columns.end(), [](const SchemaColumn& c) {
    return c.role == ColumnRole::src_port || c.role == ColumnRole::dst_port;
  });
}

bool FlowRecord::operator==(const FlowRecord& o) const {
  if (numeric.size() != o.numeric.size()) return false;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const bool both_nan = std::isnan(numeric[i]) && std::isnan(o.numeric[i]);
    if (!both_nan && numeric[i] != o.numeric[i]) return false;
  }
  return src_ip == o.src_ip && dst_ip == o.dst_ip && src_port == o.src_port && dst_port == o.dst_port &&
         categorical == o.categorical && label == o.label && attack_type == o.attack_type;
}

bool FlowTable::labelled() const {
  return std::all_of(records.begin(), records.end(), [](const FlowRecord& r) { return r.label.has_value(); });
}

ParseError::ParseError(std::size_t row, const std::string& what)
    : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}

void SplitSpec::validate() const {
  if (!(downsample_fraction > 0.0 && downsample_fraction <= 1.0)) {
    throw std::invalid_argument("downsample_fraction must be in (0, 1]");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  }
  if (contamination.kind == ContaminationMode::Kind::fraction &&
      !(contamination.fraction >= 0.0 && contamination.fraction < 1.0)) {
    throw std::invalid_argument("contamination fraction must be in [0, 1)");
  }
}

FlowTable parse_csv(std::istream& in, std::string_view schema_id) {
  const DatasetSchema& schema = builtin_schema(schema_id);
  auto layout = std::make_shared<FeatureLayout>(FeatureLayout::from_schema(schema));

  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("empty CSV: missing header row");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  std::map<std::string, std::size_t, std::less<>> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!position.emplace(std::string(header[i]), i).second) {
      throw SchemaError("duplicate header column '" + std::string(header[i]) + "'");
    }
  }
  auto column_index = [&](const std::string& name) -> std::size_t {
    const auto it = position.find(name);
    if (it == position.end()) {
      throw SchemaError("header is missing column '" + name + "' required by schema " + schema.id);
    }
    return it->second;
  };

  std::size_t src_ip = 0, dst_ip = 0;
  std::optional<std::size_t> src_port, dst_port;
  std::vector<std::size_t> cat_idx, num_idx;
  for (const auto& c : schema.columns) {
    const std::size_t idx = column_index(c.name);
    switch (c.role) {
      case ColumnRole::src_ip: src_ip = idx; break;
      case ColumnRole::dst_ip: dst_ip = idx; break;
      case ColumnRole::src_port: src_port = idx; break;
      case ColumnRole::dst_port: dst_port = idx; break;
      case ColumnRole::categorical: cat_idx.push_back(idx); break;
      case ColumnRole::numeric: num_idx.push_back(idx); break;
    }
  }
  std::optional<std::size_t> label_idx, attack_idx;
  if (auto it = position.find(schema.label_column); it != position.end()) label_idx = it->second;
  if (auto it = position.find(schema.attack_type_column); it != position.end()) attack_idx = it->second;
  const std::size_t known = schema.columns.size() + (label_idx ? 1 : 0) + (attack_idx ? 1 : 0);
  if (known != header.size()) {
    for (const auto& [name, idx] : position) {
      const bool in_schema = std::any_of(schema.columns.begin(), schema.columns.end(),
                                         [&](const SchemaColumn& c) { return c.name == name; });
      if (!in_schema && name != schema.label_column && name != schema.attack_type_column) {
        throw SchemaError("header column '" + name + "' is not part of schema " + schema.id);
      }
    }
  }

  FlowTable table;
  table.layout = layout;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(row, "expected " + std::to_string(header.size()) + " cells, found " +
                                std::to_string(cells.size()));
    }
    FlowRecord rec;
    rec.src_ip = std::string(cells[src_ip]);
    rec.dst_ip = std::string(cells[dst_ip]);
    if (rec.src_ip.empty() || rec.dst_ip.empty()) {
      throw ParseError(row, "empty IP address");
    }
    auto parse_port = [&](std::optional<std::size_t> idx) -> std::optional<std::int64_t> {
      if (!idx || cells[*idx].empty()) return std::nullopt;
      double v = 0.0;
      if (!parse_double(cells[*idx], v) || !std::isfinite(v) || v != std::floor(v)) {
        throw ParseError(row, "port value '" + std::string(cells[*idx]) + "' is not an integer");
      }
      return static_cast<std::int64_t>(v);
    };
    rec.src_port = parse_port(src_port);
    rec.dst_port = parse_port(dst_port);
    rec.categorical.reserve(cat_idx.size());
    for (std::size_t idx : cat_idx) rec.categorical.emplace_back(cells[idx]);
    rec.numeric.reserve(num_idx.size());
    for (std::size_t k = 0; k < num_idx.size(); ++k) {
      double v = 0.0;
      if (!parse_double(cells[num_idx[k]], v)) {
        throw ParseError(row, "column " + layout->numeric_names[k] + ": non-numeric value '" +
                                  std::string(cells[num_idx[k]]) + "'");
      }
      rec.numeric.push_back(v);
    }
    if (label_idx) rec.label = parse_label(cells[*label_idx], row);
    if (attack_idx && !cells[*attack_idx].empty()) rec.attack_type = std::string(cells[*attack_idx]);
    table.records.push_back(std::move(rec));
  }
  log::info("parsed ", table.records.size(), " flow records (schema ", schema.id, ")");
  return table;
}

FlowTable load_csv(const std::filesystem::path& path, std::string_view schema_id) {
  builtin_schema(schema_id);
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open CSV file " + path.string());
  }
  return parse_csv(in, schema_id);
}

FlowTable downsample(const FlowTable& table, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = table.records.size();
  const auto k = static_cast<std::size_t>(std::llround(spec.downsample_fraction * static_cast<double>(n)));
  Rng rng(mix_seed(spec.rng_seed, 0xD0));
  auto picked = rng.sample_without_replacement(n, k);
  std::sort(picked.begin(), picked.end());
  FlowTable out;
  out.layout = table.layout;
  out.records.reserve(picked.size());
  for (std::size_t i : picked) out.records.push_back(table.records[i]);
  return out;
}

TrainTestSplit split(const FlowTable& table, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = table.records.size();
  const auto train_size = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  Rng rng(mix_seed(spec.rng_seed, 0x51));

  std::vector<std::size_t> benign, attack;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& label = table.records[i].label;
    (label && *label == FlowLabel::attack ? attack : benign).push_back(i);
  }

  std::vector<std::size_t> train_idx;
  auto take = [&](const std::vector<std::size_t>& pool, std::size_t count) {
    for (std::size_t j : rng.sample_without_replacement(pool.size(), count)) train_idx.push_back(pool[j]);
  };

  if (spec.contamination.kind == ContaminationMode::Kind::none) {
    // Unlabelled rows count as benign-eligible.
    if (benign.size() < train_size) {
      throw std::runtime_error("split: need " + std::to_string(train_size) + " benign records for training, have " +
                               std::to_string(benign.size()));
    }
    take(benign, train_size);
  } else {
    if (!table.labelled()) {
      throw std::runtime_error("split: contamination mode requires labelled records");
    }
    // Small epsilon keeps products like 0.05 * 100 from rounding up past the integer.
    const double want = spec.contamination.fraction * static_cast<double>(train_size);
    const auto n_attack = static_cast<std::size_t>(std::ceil(want - 1e-9));
    if (n_attack > attack.size()) {
      throw std::runtime_error("split: contamination " + std::to_string(spec.contamination.fraction) + " needs " +
                               std::to_string(n_attack) + " attack records, only " + std::to_string(attack.size()) +
                               " available");
    }
    if (train_size - n_attack > benign.size()) {
      throw std::runtime_error("split: not enough benign records to fill the training split");
    }
    take(attack, n_attack);
    take(benign, train_size - n_attack);
  }

  std::sort(train_idx.begin(), train_idx.end());
  std::vector<bool> in_train(n, false);
  for (std::size_t i : train_idx) in_train[i] = true;

  TrainTestSplit out;
  out.train.layout = table.layout;
  out.test.layout = table.layout;
  out.train.records.reserve(train_idx.size());
  out.test.records.reserve(n - train_idx.size());
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? out.train : out.test).records.push_back(table.records[i]);
  }
  return out;
}

}  // namespace anomale
