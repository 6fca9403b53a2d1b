// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>

#include "trajaudit/core/dataset.hpp"
#include "trajaudit/core/runtime.hpp"

namespace trajaudit::verifier {

// Test oracle: the report is the ground-truth label.
inline DiagnosticReport oracle_verify(const LabeledTrajectory& item) {
  if (item.label.verdict == Verdict::Normal) return DiagnosticReport::normal();
  DiagnosticReport r;
  r.verdict = Verdict::Anomaly;
  r.error_step = item.label.first_error_step;
  r.error_content = item.label.error_content;
  return r;
}

inline PredictionMap oracle_predictions(const Dataset& ds) {
  PredictionMap out;
  for (const auto& item : ds.items()) out[item.trajectory.id] = oracle_verify(item);
  return out;
}

// Looks labels up by trajectory id; unknown ids read as Normal.
class LabelOracle : public Verifier {
public:
  explicit LabelOracle(const Dataset& ds) {
    for (const auto& item : ds.items()) labels_[item.trajectory.id] = item;
  }

  DiagnosticReport audit(const Trajectory& t) override {
    auto it = labels_.find(t.id);
    return it == labels_.end() ? DiagnosticReport::normal() : oracle_verify(it->second);
  }

private:
  std::map<std::string, LabeledTrajectory> labels_;
};

// Flags the first step whose action or thought departs from a reference run,
// or the first step past the reference's end.
class ReferenceOracle : public Verifier {
public:
  explicit ReferenceOracle(Trajectory reference) : reference_(std::move(reference)) {}

  DiagnosticReport audit(const Trajectory& t) override {
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      if (i >= reference_.steps.size()) {
        return DiagnosticReport::anomaly(static_cast<int>(i) + 1, "step " + std::to_string(i + 1) +
                                                                      " continues past the end of the reference run");
      }
      const Step& got = t.steps[i];
      const Step& want = reference_.steps[i];
      if (got.action.raw != want.action.raw || got.thought != want.thought) {
        return DiagnosticReport::anomaly(static_cast<int>(i) + 1, "step " + std::to_string(i + 1) + " runs " +
                                                                      got.action.raw + " where the reference runs " +
                                                                      want.action.raw);
      }
    }
    return DiagnosticReport::normal();
  }

private:
  Trajectory reference_;
};

class FunctionVerifier : public Verifier {
public:
  explicit FunctionVerifier(std::function<DiagnosticReport(const Trajectory&)> fn) : fn_(std::move(fn)) {}
  DiagnosticReport audit(const Trajectory& t) override { return fn_(t); }

private:
  std::function<DiagnosticReport(const Trajectory&)> fn_;
};

} // namespace trajaudit::verifier
