// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <variant>
#include <vector>

#include "trajaudit/synth/perturbation.hpp"

namespace trajaudit::synth {

struct GenerationFailure {
  enum class Kind { Refusal, ParseFailure };
  Kind kind = Kind::ParseFailure;
  std::string detail;
};

inline const char* to_string(GenerationFailure::Kind k) {
  return k == GenerationFailure::Kind::Refusal ? "refusal" : "parse_failure";
}

using Continuation = std::variant<std::vector<StepDraft>, GenerationFailure>;

// Produces the steps that follow a perturbed prefix.
class Generator {
public:
  virtual ~Generator() = default;
  virtual Continuation continue_from(const PerturbedPrefix& prefix) = 0;
};

// Emits the same continuation for every prefix.
class ScriptedGenerator : public Generator {
public:
  explicit ScriptedGenerator(std::vector<StepDraft> steps) : steps_(std::move(steps)) {}
  Continuation continue_from(const PerturbedPrefix&) override { return steps_; }

private:
  std::vector<StepDraft> steps_;
};

// Continues with the source trajectory's own tail (steps t+1..n). Useful for
// seeds from any domain when no model is available.
class CopyTailGenerator : public Generator {
public:
  Continuation continue_from(const PerturbedPrefix& p) override {
    std::vector<StepDraft> out;
    for (std::size_t i = static_cast<std::size_t>(p.spec.target_step); i < p.source.steps.size(); ++i) {
      out.push_back(to_draft(p.source.steps[i]));
    }
    return out;
  }
};

inline std::vector<std::string> default_refusal_phrases() {
  return {"i cannot", "i can't", "i can not", "i'm sorry", "i am sorry", "i won't", "i will not", "as an ai",
          "unable to comply"};
}

inline bool is_refusal(const std::string& thought, const std::vector<std::string>& phrases) {
  std::string lower = thought;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const std::string& p : phrases) {
    std::string lp = p;
    std::transform(lp.begin(), lp.end(), lp.begin(), [](unsigned char c) { return std::tolower(c); });
    if (!lp.empty() && lower.find(lp) != std::string::npos) return true;
  }
  return false;
}

inline std::string synthesized_id(const Trajectory& source, const PerturbationSpec& spec) {
  return source.id + "~" + std::string(to_string(spec.anomaly_type)) + "@" + std::to_string(spec.target_step);
}

using Completion = std::variant<Trajectory, GenerationFailure>;

// prefix ++ continuation, reindexed, carrying the perturbed context. A
// continuation whose first thought matches a refusal phrase is a Refusal.
inline Completion complete_trajectory(const PerturbedPrefix& prefix, Generator& generator,
                                      const std::vector<std::string>& refusal_phrases = default_refusal_phrases()) {
  Continuation c = generator.continue_from(prefix);
  if (auto* failure = std::get_if<GenerationFailure>(&c)) return *failure;
  auto& steps = std::get<std::vector<StepDraft>>(c);
  if (!steps.empty() && is_refusal(steps.front().thought, refusal_phrases)) {
    return GenerationFailure{GenerationFailure::Kind::Refusal, steps.front().thought};
  }
  Trajectory t;
  t.id = synthesized_id(prefix.source, prefix.spec);
  t.instruction = prefix.instruction;
  t.available_tools = prefix.available_tools;
  t.domain = prefix.source.domain;
  t.task = prefix.source.task;
  t.metadata = prefix.source.metadata;
  t.metadata["source"] = "synthesized";
  t.metadata["perturbation"] = std::string(to_string(prefix.spec.anomaly_type));
  t.metadata["target_step"] = std::to_string(prefix.spec.target_step);
  t.steps = prefix.prefix;
  for (const StepDraft& d : steps) t.steps.push_back(to_step(d, 0));
  reindex(t.steps);
  try {
    validate(t);
  } catch (const InvariantError& e) {
    return GenerationFailure{GenerationFailure::Kind::ParseFailure, e.what()};
  }
  return t;
}

// Location rule: the first inserted step for II, the perturbed step otherwise.
inline int first_error_step(const PerturbationSpec& spec) {
  return spec.anomaly_type == AnomalyType::Inefficiency ? spec.target_step + 1 : spec.target_step;
}

inline LabeledTrajectory annotate(const Trajectory& completed, const PerturbationSpec& spec,
                                  const std::string& error_content, const std::string& source_id) {
  return {completed, AnomalyLabel::anomaly(spec.anomaly_type, first_error_step(spec), error_content, source_id)};
}

} // namespace trajaudit::synth
