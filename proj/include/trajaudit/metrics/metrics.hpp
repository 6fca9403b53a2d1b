// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "trajaudit/core/dataset.hpp"
#include "trajaudit/core/errors.hpp"
#include "trajaudit/core/report.hpp"
#include "trajaudit/metrics/similarity.hpp"

namespace trajaudit::metrics {

inline constexpr double kDefaultTau = 0.2;

// Anomaly is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  void add(Verdict pred, Verdict gt) {
    if (gt == Verdict::Anomaly) {
      (pred == Verdict::Anomaly ? tp : fn) += 1;
    } else {
      (pred == Verdict::Anomaly ? fp : tn) += 1;
    }
  }

  bool operator==(const ConfusionCounts&) const = default;
};

namespace detail {

inline double safe_div(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

} // namespace detail

struct DetectionScores {
  double precision = 0.0;
  double recall = 0.0;
  double macro_f1 = 0.0;
  ConfusionCounts counts;
};

// Zero denominators read as 0. Macro-F1 averages the Anomaly-class and
// Normal-class F1 scores.
inline DetectionScores scores_from_counts(const ConfusionCounts& c) {
  DetectionScores s;
  s.counts = c;
  s.precision = detail::safe_div(c.tp, c.tp + c.fp);
  s.recall = detail::safe_div(c.tp, c.tp + c.fn);
  const double f1_anomaly = detail::f1(s.precision, s.recall);
  const double f1_normal = detail::f1(detail::safe_div(c.tn, c.tn + c.fn), detail::safe_div(c.tn, c.tn + c.fp));
  s.macro_f1 = (f1_anomaly + f1_normal) / 2.0;
  return s;
}

inline DetectionScores classification_metrics(std::span<const Verdict> preds, std::span<const Verdict> gts) {
  if (preds.size() != gts.size()) {
    throw LengthMismatch("predictions (" + std::to_string(preds.size()) + ") and ground truths (" +
                         std::to_string(gts.size()) + ") differ in length");
  }
  if (preds.empty()) throw LengthMismatch("no verdicts to score");
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) c.add(preds[i], gts[i]);
  return scores_from_counts(c);
}

// 1 iff the prediction flags an anomaly at the ground-truth step and its
// error content is more similar than tau to the ground-truth content.
inline int joint_exact_match(const DiagnosticReport& pred, const AnomalyLabel& gt, double tau = kDefaultTau,
                             const SimilarityOptions& opts = {}) {
  if (gt.verdict != Verdict::Anomaly || !gt.first_error_step || !gt.error_content) return 0;
  if (pred.verdict != Verdict::Anomaly || !pred.error_step || !pred.error_content) return 0;
  if (*pred.error_step != *gt.first_error_step) return 0;
  return sequence_similarity(*pred.error_content, *gt.error_content, opts) > tau ? 1 : 0;
}

inline bool localization_match(const DiagnosticReport& pred, const AnomalyLabel& gt) {
  return gt.verdict == Verdict::Anomaly && pred.verdict == Verdict::Anomaly && pred.error_step &&
         gt.first_error_step && *pred.error_step == *gt.first_error_step;
}

struct ScoreBlock {
  double precision = 0.0;
  double recall = 0.0;
  double macro_f1 = 0.0;
  double jem = 0.0;
  double localization_only_match = 0.0;
  ConfusionCounts counts;
  std::size_t jem_hits = 0;
  std::size_t localization_hits = 0;
  std::size_t anomalous_ground_truths = 0;
};

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double macro_f1 = 0.0;
  double jem = 0.0;
  double localization_only_match = 0.0;
  ConfusionCounts counts;
  std::size_t jem_hits = 0;
  std::size_t localization_hits = 0;
  std::size_t anomalous_ground_truths = 0;
  std::map<std::string, ScoreBlock> per_domain;
  // Dataset ids without a prediction; scored as predicted Normal.
  std::vector<std::string> missing_reports;
  double tau = kDefaultTau;
};

struct EvaluateOptions {
  double tau = kDefaultTau;
  SimilarityOptions similarity;
};

namespace detail {

struct Accumulator {
  ConfusionCounts counts;
  std::size_t jem_hits = 0;
  std::size_t loc_hits = 0;
  std::size_t anomalies = 0;

  ScoreBlock finish() const {
    ScoreBlock b;
    const DetectionScores s = scores_from_counts(counts);
    b.precision = s.precision;
    b.recall = s.recall;
    b.macro_f1 = s.macro_f1;
    b.counts = counts;
    b.jem_hits = jem_hits;
    b.localization_hits = loc_hits;
    b.anomalous_ground_truths = anomalies;
    b.jem = safe_div(jem_hits, anomalies);
    b.localization_only_match = safe_div(loc_hits, anomalies);
    return b;
  }
};

} // namespace detail

inline MetricsReport evaluate(const Dataset& dataset, const PredictionMap& reports, const EvaluateOptions& opts = {}) {
  detail::Accumulator overall;
  std::map<std::string, detail::Accumulator> by_domain;
  MetricsReport out;
  out.tau = opts.tau;
  const DiagnosticReport missing = DiagnosticReport::normal(ParseMode::Failed);

  for (const LabeledTrajectory& item : dataset.items()) {
    const auto it = reports.find(item.trajectory.id);
    if (it == reports.end()) out.missing_reports.push_back(item.trajectory.id);
    const DiagnosticReport& pred = it == reports.end() ? missing : it->second;
    auto& dom = by_domain[std::string(to_string(item.trajectory.domain))];
    for (detail::Accumulator* acc : {&overall, &dom}) {
      acc->counts.add(pred.verdict, item.label.verdict);
      if (item.label.verdict == Verdict::Anomaly) {
        ++acc->anomalies;
        acc->jem_hits += static_cast<std::size_t>(joint_exact_match(pred, item.label, opts.tau, opts.similarity));
        acc->loc_hits += localization_match(pred, item.label) ? 1 : 0;
      }
    }
  }

  const ScoreBlock total = overall.finish();
  out.precision = total.precision;
  out.recall = total.recall;
  out.macro_f1 = total.macro_f1;
  out.jem = total.jem;
  out.localization_only_match = total.localization_only_match;
  out.counts = total.counts;
  out.jem_hits = total.jem_hits;
  out.localization_hits = total.localization_hits;
  out.anomalous_ground_truths = total.anomalous_ground_truths;
  for (const auto& [domain, acc] : by_domain) out.per_domain[domain] = acc.finish();
  return out;
}

// ---------------------------------------------------------------------------
// Summary file and table

inline ojson score_block_json(const ScoreBlock& b) {
  ojson o = ojson::object();
  o["precision"] = b.precision;
  o["recall"] = b.recall;
  o["macro_f1"] = b.macro_f1;
  o["jem"] = b.jem;
  o["localization_only_match"] = b.localization_only_match;
  o["counts"] = {{"tp", b.counts.tp}, {"fp", b.counts.fp}, {"tn", b.counts.tn}, {"fn", b.counts.fn}};
  o["anomalous_ground_truths"] = b.anomalous_ground_truths;
  return o;
}

inline ojson metrics_to_json(const MetricsReport& r) {
  ojson o = ojson::object();
  o["precision"] = r.precision;
  o["recall"] = r.recall;
  o["macro_f1"] = r.macro_f1;
  o["jem"] = r.jem;
  o["localization_only_match"] = r.localization_only_match;
  o["tau"] = r.tau;
  o["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}};
  o["jem_hits"] = r.jem_hits;
  o["localization_hits"] = r.localization_hits;
  o["anomalous_ground_truths"] = r.anomalous_ground_truths;
  ojson dom = ojson::object();
  for (const auto& [name, block] : r.per_domain) dom[name] = score_block_json(block);
  o["per_domain"] = std::move(dom);
  o["missing_reports"] = r.missing_reports;
  return o;
}

inline std::string percent2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v * 100.0);
  return buf;
}

// Renders one or more metrics summaries as a table with Precision, Recall,
// Macro-F1 and JEM columns; one row per model, then per-domain rows.
inline std::string render_table(const std::vector<std::pair<std::string, ojson>>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %10s %10s %10s %10s\n", "Model", "P(%)", "R(%)", "Macro-F1(%)", "JEM(%)");
  out += line;
  out += std::string(72, '-') + "\n";
  for (const auto& [name, m] : rows) {
    std::snprintf(line, sizeof line, "%-28s %10s %10s %10s %10s\n", name.c_str(),
                  percent2(m.at("precision").get<double>()).c_str(), percent2(m.at("recall").get<double>()).c_str(),
                  percent2(m.at("macro_f1").get<double>()).c_str(), percent2(m.at("jem").get<double>()).c_str());
    out += line;
    if (auto dom = m.find("per_domain"); dom != m.end()) {
      for (auto it = dom->begin(); it != dom->end(); ++it) {
        const std::string label = "  " + it.key();
        const ojson& b = it.value();
        std::snprintf(line, sizeof line, "%-28s %10s %10s %10s %10s\n", label.c_str(),
                      percent2(b.at("precision").get<double>()).c_str(),
                      percent2(b.at("recall").get<double>()).c_str(),
                      percent2(b.at("macro_f1").get<double>()).c_str(), percent2(b.at("jem").get<double>()).c_str());
        out += line;
      }
    }
  }
  return out;
}

} // namespace trajaudit::metrics
