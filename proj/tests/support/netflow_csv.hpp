#pragma once

// Builds small NetFlow v2 CSV documents for parser and pipeline tests.

#include "anomale/flow_ingest.hpp"

#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace anomale::testkit {

struct CsvRow {
  std::string src = "10.0.0.1";
  std::string dst = "10.0.0.2";
  std::string label = "0";
  std::string attack = "Benign";
  std::map<std::string, std::string> cells;  // overrides, by column name
};

inline std::vector<std::string> netflow_header(bool with_labels = true) {
  std::vector<std::string> h;
  for (const auto& c : builtin_schema("NF-UNSW-NB15-v2").columns) h.push_back(c.name);
  if (with_labels) {
    h.emplace_back("Label");
    h.emplace_back("Attack");
  }
  return h;
}

inline std::string netflow_csv(const std::vector<CsvRow>& rows, bool with_labels = true) {
  const auto header = netflow_header(with_labels);
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      const auto& name = header[i];
      std::string v;
      if (auto it = r.cells.find(name); it != r.cells.end()) {
        v = it->second;
      } else if (name == "IPV4_SRC_ADDR") {
        v = r.src;
      } else if (name == "IPV4_DST_ADDR") {
        v = r.dst;
      } else if (name == "Label") {
        v = r.label;
      } else if (name == "Attack") {
        v = r.attack;
      } else if (name == "PROTOCOL") {
        v = "6";
      } else if (name == "L7_PROTO") {
        v = "7.0";
      } else if (name == "TCP_FLAGS") {
        v = "27";
      } else {
        v = std::to_string(i + 1);
      }
      os << (i ? "," : "") << v;
    }
    os << '\n';
  }
  return os.str();
}

/// n rows; every k-th (offset 0) is an attack.
inline std::vector<CsvRow> mixed_rows(std::size_t n, std::size_t attack_every) {
  std::vector<CsvRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].src = "10.0." + std::to_string(i % 7) + ".1";
    rows[i].dst = "10.1." + std::to_string(i % 5) + ".1";
    rows[i].cells["IN_BYTES"] = std::to_string(100 + i);
    if (attack_every > 0 && i % attack_every == 0) {
      rows[i].label = "1";
      rows[i].attack = "DoS";
    }
  }
  return rows;
}

}  // namespace anomale::testkit
