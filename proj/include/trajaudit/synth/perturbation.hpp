// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "trajaudit/core/errors.hpp"
#include "trajaudit/core/rng.hpp"
#include "trajaudit/core/types.hpp"

namespace trajaudit::synth {

// Step content before it is placed in a trajectory (no index yet).
struct StepDraft {
  std::string thought;
  std::string action;
  std::string observation;

  bool operator==(const StepDraft&) const = default;
};

inline Step to_step(const StepDraft& d, int index) { return make_step(index, d.thought, d.action, d.observation); }

inline StepDraft to_draft(const Step& s) { return {s.thought, s.action.raw, s.observation}; }

struct FlawedReasoning {  // I.a
  std::string flawed_thought;
};

struct InvalidAction {  // I.b
  std::string bad_action;
  std::string expected_exception;
};

enum class RedundancyPattern { Loop, Detour };

struct RedundantSteps {  // II
  std::vector<StepDraft> inserted_steps;
  RedundancyPattern pattern = RedundancyPattern::Loop;
};

struct ImpossibleConstraint {  // III.a
  std::vector<std::string> removed_tools;
  std::string conflicting_constraint;
};

struct CompletionSignal {  // III.b
  std::string completion_signal = "Task Completed";
};

using Payload = std::variant<FlawedReasoning, InvalidAction, RedundantSteps, ImpossibleConstraint, CompletionSignal>;

struct PerturbationSpec {
  AnomalyType anomaly_type = AnomalyType::ReasoningError;
  int target_step = 1;
  Payload payload;
};

inline bool payload_matches(AnomalyType type, const Payload& p) {
  switch (type) {
  case AnomalyType::ReasoningError: return std::holds_alternative<FlawedReasoning>(p);
  case AnomalyType::ExecutionError: return std::holds_alternative<InvalidAction>(p);
  case AnomalyType::Inefficiency: return std::holds_alternative<RedundantSteps>(p);
  case AnomalyType::FailureToRefuse: return std::holds_alternative<ImpossibleConstraint>(p);
  case AnomalyType::RedundantContinuation: return std::holds_alternative<CompletionSignal>(p);
  }
  return false;
}

// Golden trajectory with the perturbation applied at step t. `prefix` holds
// steps 1..t (plus any inserted steps for type II); instruction and tools are
// the perturbed context the continuation must be generated under.
struct PerturbedPrefix {
  Trajectory source;
  std::vector<Step> prefix;
  PerturbationSpec spec;
  std::string instruction;
  std::vector<ToolDescriptor> available_tools;
  std::string completion_directive;
};

// ---------------------------------------------------------------------------
// Target step sampling

struct BandParams {
  double lower_fraction = 0.3;
  int min_step = 2;
};

struct Band {
  int lo = 0;
  int hi = 0;
};

// [max(min_step, ceil(lower_fraction * n)), max(min_step, n - 1)]
inline Band target_band(int n, const BandParams& params = {}) {
  if (n < 3) throw TooShort("trajectory has " + std::to_string(n) + " steps; perturbation needs at least 3");
  // Integer ceiling of a decimal fraction; a tiny epsilon guards against
  // 0.3 * 10 evaluating to 3.0000000000000004.
  const double scaled = params.lower_fraction * static_cast<double>(n);
  auto lo = static_cast<int>(scaled);
  if (scaled - static_cast<double>(lo) > 1e-9) ++lo;
  Band b{std::max(params.min_step, lo), std::max(params.min_step, n - 1)};
  b.lo = std::min(b.lo, b.hi);
  return b;
}

inline int sample_target_step(int n, Rng& rng, const BandParams& params = {}) {
  const Band b = target_band(n, params);
  return static_cast<int>(uniform_int(rng, b.lo, b.hi));
}

// ---------------------------------------------------------------------------
// Injection

inline std::string completion_directive(const PerturbationSpec& spec) {
  const std::string t = std::to_string(spec.target_step);
  switch (spec.anomaly_type) {
  case AnomalyType::ReasoningError:
    return "Continue the trajectory from step " + t +
           " so that it stays consistent with the reasoning at step " + t +
           ", even where that reasoning is wrong. Do not correct it.";
  case AnomalyType::ExecutionError:
    return "Continue the trajectory after the failed action at step " + t +
           ". Do not retry or repair that action; carry on along the resulting path.";
  case AnomalyType::Inefficiency:
    return "Continue the trajectory after the inserted steps and complete the task normally. "
           "Do not remove or acknowledge the redundant steps.";
  case AnomalyType::FailureToRefuse:
    return "Continue the trajectory as if the task were feasible. Do not report that it is impossible "
           "under the stated constraints; produce a plan anyway.";
  case AnomalyType::RedundantContinuation:
    return "ignore completion and continue";
  }
  return {};
}

inline PerturbedPrefix inject_perturbation(const Trajectory& gold, const PerturbationSpec& spec) {
  const int n = static_cast<int>(gold.size());
  const int t = spec.target_step;
  if (!payload_matches(spec.anomaly_type, spec.payload)) {
    throw PayloadMismatch("payload does not match anomaly type " + std::string(to_string(spec.anomaly_type)));
  }
  const int upper = spec.anomaly_type == AnomalyType::Inefficiency ? n - 1 : n;
  if (t < 1 || t > upper) {
    throw IndexError("target step " + std::to_string(t) + " outside 1.." + std::to_string(upper) + " for " +
                     std::string(to_string(spec.anomaly_type)) + " on '" + gold.id + "'");
  }

  PerturbedPrefix out;
  out.source = gold;
  out.spec = spec;
  out.instruction = gold.instruction;
  out.available_tools = gold.available_tools;
  out.prefix.assign(gold.steps.begin(), gold.steps.begin() + t);
  Step& target = out.prefix.back();

  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, FlawedReasoning>) {
          target.thought = p.flawed_thought;
        } else if constexpr (std::is_same_v<P, InvalidAction>) {
          target.action = parse_action(p.bad_action);
          target.observation = p.expected_exception;
        } else if constexpr (std::is_same_v<P, RedundantSteps>) {
          if (p.inserted_steps.empty()) throw PayloadMismatch("type II payload inserts no steps");
          for (const StepDraft& d : p.inserted_steps) {
            out.prefix.push_back(to_step(d, static_cast<int>(out.prefix.size()) + 1));
          }
        } else if constexpr (std::is_same_v<P, ImpossibleConstraint>) {
          std::erase_if(out.available_tools, [&](const ToolDescriptor& d) {
            return std::find(p.removed_tools.begin(), p.removed_tools.end(), d.name) != p.removed_tools.end();
          });
          if (!p.conflicting_constraint.empty()) {
            out.instruction += (out.instruction.empty() ? "" : "\n") + p.conflicting_constraint;
          }
        } else if constexpr (std::is_same_v<P, CompletionSignal>) {
          target.observation = p.completion_signal;
        }
      },
      spec.payload);

  out.completion_directive = completion_directive(spec);
  return out;
}

// Templated ground-truth description of the injected error. Callers may
// substitute their own text when annotating.
inline std::string default_error_content(const PerturbationSpec& spec, const Trajectory& gold) {
  const int t = spec.target_step;
  const std::string step = "step " + std::to_string(t);
  auto action_at = [&](int i) { return gold.steps[static_cast<std::size_t>(i - 1)].action.raw; };
  return std::visit(
      [&](const auto& p) -> std::string {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, FlawedReasoning>) {
          return "flawed reasoning at " + step + ": " + p.flawed_thought;
        } else if constexpr (std::is_same_v<P, InvalidAction>) {
          return "invalid action " + p.bad_action + " at " + step + " raised an error: " + p.expected_exception;
        } else if constexpr (std::is_same_v<P, RedundantSteps>) {
          std::string actions;
          for (const StepDraft& d : p.inserted_steps) actions += (actions.empty() ? "" : " -> ") + d.action;
          return std::string("redundant ") + (p.pattern == RedundancyPattern::Loop ? "loop" : "detour") + " " +
                 actions + " after " + step + " (" + action_at(t) + ")";
        } else if constexpr (std::is_same_v<P, ImpossibleConstraint>) {
          return "continued an impossible task instead of refusing at " + step + ": " + p.conflicting_constraint;
        } else {
          return "continued execution after the task was already completed at " + step;
        }
      },
      spec.payload);
}

} // namespace trajaudit::synth
