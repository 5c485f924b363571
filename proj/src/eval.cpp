#include "anomale/eval.hpp"

#include "anomale/log.hpp"

#include <json.hpp>

#include <cctype>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace anomale {

Confusion confusion(const std::vector<bool>& anomaly_flags, std::span<const FlowLabel> labels) {
  if (anomaly_flags.size() != labels.size()) {
    throw std::invalid_argument("metrics: " + std::to_string(anomaly_flags.size()) + " flags vs " +
                                std::to_string(labels.size()) + " labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool attack = labels[i] == FlowLabel::attack;
    if (anomaly_flags[i]) {
      ++(attack ? c.tp : c.fp);
    } else {
      ++(attack ? c.fn : c.tn);
    }
  }
  return c;
}

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

Metrics metrics_from_counts(const Confusion& c) {
  Metrics m;
  m.counts = c;
  const auto n = c.total();
  m.accuracy = n == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
  m.detection_rate = (c.tp + c.fn) == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tp + c.fp + c.fn == 0) log::debug("metrics: attack class has no support and no predictions, F1 := 0");
  if (c.tn + c.fn + c.fp == 0) log::debug("metrics: benign class has no support and no predictions, F1 := 0");
  const double f1_attack = f1_score(c.tp, c.fp, c.fn);
  const double f1_benign = f1_score(c.tn, c.fn, c.fp);
  m.macro_f1 = 0.5 * (f1_attack + f1_benign);
  return m;
}

Metrics metrics(const std::vector<bool>& anomaly_flags, std::span<const FlowLabel> labels) {
  return metrics_from_counts(confusion(anomaly_flags, labels));
}

std::string_view to_string(InputKind k) { return k == InputKind::raw ? "raw" : "embeddings"; }

const ReportRow* EvalReport::find(std::string_view detector, InputKind input) const {
  for (const auto& r : rows) {
    if (r.detector == detector && r.input == input) return &r;
  }
  return nullptr;
}

std::vector<ComparisonRow> compare(const EvalReport& raw, const EvalReport& embeddings) {
  std::vector<ComparisonRow> out;
  for (const auto& r : raw.rows) {
    const ReportRow* e = nullptr;
    for (const auto& cand : embeddings.rows) {
      if (cand.detector == r.detector) {
        e = &cand;
        break;
      }
    }
    if (e == nullptr) continue;
    ComparisonRow row;
    row.detector = r.detector;
    row.raw = r.metrics;
    row.embeddings = e->metrics;
    row.delta_accuracy = e->metrics.accuracy - r.metrics.accuracy;
    row.delta_macro_f1 = e->metrics.macro_f1 - r.metrics.macro_f1;
    row.delta_detection_rate = e->metrics.detection_rate - r.metrics.detection_rate;
    out.push_back(std::move(row));
  }
  return out;
}

namespace {
std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
  return buf;
}

std::string fixed(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}
}  // namespace

void write_comparison_table(std::ostream& os, const std::vector<ComparisonRow>& rows, std::string_view title) {
  if (!title.empty()) os << title << '\n';
  os << std::left << std::setw(10) << "" << "| " << std::setw(32) << "Raw Features"
     << "| " << "Embeddings" << '\n';
  os << std::setw(10) << "" << "| " << std::setw(10) << "Acc" << std::setw(11) << "Macro F1" << std::setw(11) << "DR"
     << "| " << std::setw(10) << "Acc" << std::setw(11) << "Macro F1" << std::setw(11) << "DR" << "| "
     << "dMacroF1" << '\n';
  for (const auto& r : rows) {
    std::string name = r.detector;
    for (auto& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (name == "IFOREST") name = "IF";
    os << std::setw(10) << name << "| " << std::setw(10) << percent(r.raw.accuracy) << std::setw(11)
       << percent(r.raw.macro_f1) << std::setw(11) << percent(r.raw.detection_rate) << "| " << std::setw(10)
       << percent(r.embeddings.accuracy) << std::setw(11) << percent(r.embeddings.macro_f1) << std::setw(11)
       << percent(r.embeddings.detection_rate) << "| " << fixed(100.0 * r.delta_macro_f1, 2) << '\n';
  }
  os << std::right;
}

void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "detector,raw_acc,raw_macro_f1,raw_dr,emb_acc,emb_macro_f1,emb_dr,delta_acc,delta_macro_f1,delta_dr\n";
  for (const auto& r : rows) {
    os << r.detector << ',' << fixed(r.raw.accuracy) << ',' << fixed(r.raw.macro_f1) << ','
       << fixed(r.raw.detection_rate) << ',' << fixed(r.embeddings.accuracy) << ',' << fixed(r.embeddings.macro_f1)
       << ',' << fixed(r.embeddings.detection_rate) << ',' << fixed(r.delta_accuracy) << ','
       << fixed(r.delta_macro_f1) << ',' << fixed(r.delta_detection_rate) << '\n';
  }
}

void write_report_csv(std::ostream& os, const EvalReport& report) {
  os << "detector,input,accuracy,macro_f1,detection_rate,tp,fp,tn,fn\n";
  for (const auto& r : report.rows) {
    const auto& m = r.metrics;
    os << r.detector << ',' << to_string(r.input) << ',' << fixed(m.accuracy) << ',' << fixed(m.macro_f1) << ','
       << fixed(m.detection_rate) << ',' << m.counts.tp << ',' << m.counts.fp << ',' << m.counts.tn << ','
       << m.counts.fn << '\n';
  }
}

void write_report_jsonl(std::ostream& os, const EvalReport& report) {
  for (const auto& r : report.rows) {
    const auto& m = r.metrics;
    nlohmann::json j = {{"detector", r.detector},
                        {"input", to_string(r.input)},
                        {"accuracy", m.accuracy},
                        {"macro_f1", m.macro_f1},
                        {"detection_rate", m.detection_rate},
                        {"tp", m.counts.tp},
                        {"fp", m.counts.fp},
                        {"tn", m.counts.tn},
                        {"fn", m.counts.fn}};
    os << j.dump() << '\n';
  }
}

}  // namespace anomale
