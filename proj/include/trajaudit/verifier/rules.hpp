// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "trajaudit/core/runtime.hpp"
#include "trajaudit/scriptenv/session.hpp"

namespace trajaudit::verifier {

// Earliest-step rule matching:
//   R1  an (action, resulting state) pair that already occurred
//   R2  an observation matching the exception pattern
//   R3  any step after an observation carrying the completion marker
// Ties at the same step resolve R2, then R3, then R1.
struct RuleSet {
  std::regex exception_pattern{R"(\b(error|exception|traceback)\b)", std::regex::icase};
  std::string completion_marker = "Task Completed";
  // State after each step, as comparable text. When absent (or when it
  // returns nullopt) the observation stands in for the state.
  std::function<std::optional<std::vector<std::string>>(const Trajectory&)> state_trace;
};

enum class RuleId { R1, R2, R3 };

struct RuleHit {
  RuleId rule = RuleId::R1;
  int step = 0;
  AnomalyType type = AnomalyType::Inefficiency;
  std::string content;
};

inline RuleSet scriptenv_rules(const scriptenv::TaskRegistry& registry) {
  RuleSet rules;
  rules.state_trace = [&registry](const Trajectory& t) -> std::optional<std::vector<std::string>> {
    if (!registry.contains(t.task)) return std::nullopt;
    const scriptenv::Replay r = scriptenv::replay(registry.get(t.task), scriptenv::actions_of(t));
    std::vector<std::string> out;
    for (const auto& s : r.states) out.push_back(scriptenv::state_key(s));
    return out;
  };
  return rules;
}

inline std::optional<RuleHit> first_rule_hit(const Trajectory& t, const RuleSet& rules) {
  std::optional<RuleHit> best;
  auto offer = [&](RuleHit hit) {
    auto rank = [](RuleId r) { return r == RuleId::R2 ? 0 : r == RuleId::R3 ? 1 : 2; };
    if (!best || hit.step < best->step || (hit.step == best->step && rank(hit.rule) < rank(best->rule))) {
      best = std::move(hit);
    }
  };

  for (const Step& s : t.steps) {
    if (std::regex_search(s.observation, rules.exception_pattern)) {
      offer({RuleId::R2, s.index, AnomalyType::ExecutionError,
             "action " + s.action.raw + " at step " + std::to_string(s.index) + " failed: " + s.observation});
      break;
    }
  }

  for (std::size_t i = 0; i + 1 < t.steps.size(); ++i) {
    if (!rules.completion_marker.empty() && t.steps[i].observation.find(rules.completion_marker) != std::string::npos) {
      offer({RuleId::R3, t.steps[i + 1].index, AnomalyType::RedundantContinuation,
             "the agent kept acting after the task was completed at step " + std::to_string(t.steps[i].index)});
      break;
    }
  }

  std::optional<std::vector<std::string>> states;
  if (rules.state_trace) states = rules.state_trace(t);
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const std::string& state = states && i < states->size() ? (*states)[i] : t.steps[i].observation;
    const std::string key = t.steps[i].action.raw + '\x1f' + state;
    auto [it, inserted] = seen.emplace(key, t.steps[i].index);
    if (!inserted) {
      offer({RuleId::R1, t.steps[i].index, AnomalyType::Inefficiency,
             "redundant " + t.steps[i].action.raw + " at step " + std::to_string(t.steps[i].index) +
                 " repeats step " + std::to_string(it->second) + " and leaves the state unchanged"});
      break;
    }
  }
  return best;
}

inline DiagnosticReport rule_verify(const Trajectory& t, const RuleSet& rules) {
  const auto hit = first_rule_hit(t, rules);
  if (!hit) return DiagnosticReport::normal();
  return DiagnosticReport::anomaly(hit->step, hit->content);
}

class RuleVerifier : public Verifier {
public:
  explicit RuleVerifier(RuleSet rules) : rules_(std::move(rules)) {}
  DiagnosticReport audit(const Trajectory& t) override { return rule_verify(t, rules_); }

private:
  RuleSet rules_;
};

} // namespace trajaudit::verifier
