// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent reference implementations used only by tests. They share no
// code with the library paths they check.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trajaudit::testkit {

// Recursive longest-match total by enumeration of every (i, j) start pair.
// Ties: earliest start in a, then earliest in b.
inline std::size_t brute_force_matched(const std::string& a, const std::string& b) {
  if (a.empty() || b.empty()) return 0;
  std::size_t bi = 0, bj = 0, bk = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      std::size_t k = 0;
      while (i + k < a.size() && j + k < b.size() && a[i + k] == b[j + k]) ++k;
      if (k > bk) {
        bi = i;
        bj = j;
        bk = k;
      }
    }
  }
  if (bk == 0) return 0;
  return bk + brute_force_matched(a.substr(0, bi), b.substr(0, bj)) +
         brute_force_matched(a.substr(bi + bk), b.substr(bj + bk));
}

inline double brute_force_similarity(const std::string& a, const std::string& b) {
  const std::size_t total = a.size() + b.size();
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(brute_force_matched(a, b)) / static_cast<double>(total);
}

// Flat record for the brute-force scorer.
struct ScoringCase {
  std::string domain;
  bool gt_anomaly = false;
  int gt_step = 0;
  std::string gt_content;
  bool has_pred = false;
  bool pred_anomaly = false;
  std::optional<int> pred_step;
  std::optional<std::string> pred_content;
};

struct BruteScores {
  double precision = 0, recall = 0, macro_f1 = 0, jem = 0, loc = 0;
};

// Straight-line recomputation from the metric definitions: counts by
// filtering, F1 from its harmonic-mean formula, JEM from the indicator
// product.
inline BruteScores brute_force_score(const std::vector<ScoringCase>& cases, double tau) {
  auto count = [&](bool pred_a, bool gt_a) {
    std::size_t n = 0;
    for (const auto& c : cases) {
      const bool p = c.has_pred && c.pred_anomaly;
      if (p == pred_a && c.gt_anomaly == gt_a) ++n;
    }
    return static_cast<double>(n);
  };
  const double tp = count(true, true), fp = count(true, false), tn = count(false, false), fn = count(false, true);
  auto ratio = [](double x, double y) { return y == 0 ? 0.0 : x / y; };
  auto harmonic = [](double p, double r) { return (p + r) == 0 ? 0.0 : 2 * p * r / (p + r); };
  BruteScores s;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  const double fa = harmonic(s.precision, s.recall);
  const double fnorm = harmonic(ratio(tn, tn + fn), ratio(tn, tn + fp));
  s.macro_f1 = (fa + fnorm) / 2;
  double hits = 0, loc = 0, anomalies = 0;
  for (const auto& c : cases) {
    if (!c.gt_anomaly) continue;
    anomalies += 1;
    const bool step_ok = c.has_pred && c.pred_anomaly && c.pred_step && *c.pred_step == c.gt_step;
    if (step_ok) loc += 1;
    if (step_ok && c.pred_content && brute_force_similarity(*c.pred_content, c.gt_content) > tau) hits += 1;
  }
  s.jem = ratio(hits, anomalies);
  s.loc = ratio(loc, anomalies);
  return s;
}

} // namespace trajaudit::testkit
