// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "trajaudit/core/dataset.hpp"
#include "trajaudit/core/ratio.hpp"
#include "trajaudit/core/rng.hpp"
#include "trajaudit/synth/generator.hpp"

namespace trajaudit::synth {

struct PipelineReport {
  std::uint64_t raw_seed_count = 0;
  std::uint64_t accepted_seed_count = 0;
  std::uint64_t synthesis_attempts = 0;
  std::uint64_t synthesis_successes = 0;
  std::uint64_t refusals = 0;
  std::uint64_t parse_failures = 0;

  Ratio pass_rate() const { return {accepted_seed_count, raw_seed_count}; }
  Ratio success_rate() const { return {synthesis_successes, synthesis_attempts}; }

  bool conserved() const { return refusals + parse_failures + synthesis_successes == synthesis_attempts; }

  void record(const GenerationFailure& f) {
    if (f.kind == GenerationFailure::Kind::Refusal) {
      ++refusals;
    } else {
      ++parse_failures;
    }
  }

  ojson to_json() const {
    ojson o = ojson::object();
    o["raw_seed_count"] = raw_seed_count;
    o["accepted_seed_count"] = accepted_seed_count;
    o["synthesis_attempts"] = synthesis_attempts;
    o["synthesis_successes"] = synthesis_successes;
    o["refusals"] = refusals;
    o["parse_failures"] = parse_failures;
    o["pass_rate"] = pass_rate().value();
    o["pass_rate_pct"] = pass_rate().percent();
    o["success_rate"] = success_rate().value();
    o["success_rate_pct"] = success_rate().percent();
    return o;
  }
};

// ---------------------------------------------------------------------------
// Seed filtering

struct ValidatorVerdict {
  bool accept = true;
  std::string reason;
};

using Validator = std::function<ValidatorVerdict(const Trajectory&)>;

inline Validator accept_all_validator() {
  return [](const Trajectory&) { return ValidatorVerdict{}; };
}

// Rejects a trajectory if any observation contains `marker`.
inline Validator observation_rule_validator(std::string marker) {
  return [marker = std::move(marker)](const Trajectory& t) {
    for (const Step& s : t.steps) {
      if (s.observation.find(marker) != std::string::npos) {
        return ValidatorVerdict{false, "step " + std::to_string(s.index) + " observation contains '" + marker + "'"};
      }
    }
    return ValidatorVerdict{};
  };
}

struct Rejection {
  Trajectory trajectory;
  std::string reason;
};

struct FilterResult {
  std::vector<Trajectory> accepted;
  std::vector<Rejection> rejected;
  PipelineReport report;
};

inline FilterResult filter_seeds(const std::vector<Trajectory>& seeds, const Validator& validator) {
  FilterResult out;
  out.report.raw_seed_count = seeds.size();
  for (const Trajectory& t : seeds) {
    ValidatorVerdict v = validator(t);
    if (v.accept) {
      out.accepted.push_back(t);
    } else {
      out.rejected.push_back({t, std::move(v.reason)});
    }
  }
  out.report.accepted_seed_count = out.accepted.size();
  return out;
}

// ---------------------------------------------------------------------------
// Anomaly mix

struct MixPlan {
  std::map<AnomalyType, std::size_t> quotas;

  std::size_t category_total(int category) const {
    std::size_t n = 0;
    for (const auto& [t, q] : quotas) {
      if (category_of(t) == category) n += q;
    }
    return n;
  }

  std::size_t total() const { return category_total(1) + category_total(2) + category_total(3); }

  // Types in plan order, Ia first, each repeated by its quota.
  std::vector<AnomalyType> expand() const {
    std::vector<AnomalyType> out;
    for (AnomalyType t : kAllAnomalyTypes) {
      auto it = quotas.find(t);
      if (it != quotas.end()) out.insert(out.end(), it->second, t);
    }
    return out;
  }
};

// Even thirds over Types I, II, III (remainder to I, then II); within I and
// III the two subtypes split as evenly as possible, first subtype first.
inline MixPlan anomaly_mix_plan(std::size_t total) {
  std::size_t by_category[3] = {total / 3, total / 3, total / 3};
  for (std::size_t i = 0; i < total % 3; ++i) ++by_category[i];
  MixPlan plan;
  plan.quotas[AnomalyType::ReasoningError] = (by_category[0] + 1) / 2;
  plan.quotas[AnomalyType::ExecutionError] = by_category[0] / 2;
  plan.quotas[AnomalyType::Inefficiency] = by_category[1];
  plan.quotas[AnomalyType::FailureToRefuse] = (by_category[2] + 1) / 2;
  plan.quotas[AnomalyType::RedundantContinuation] = by_category[2] / 2;
  return plan;
}

// Even split over an explicit subset of types, in taxonomy order.
inline MixPlan restricted_mix_plan(std::size_t total, const std::vector<AnomalyType>& types) {
  if (types.empty()) throw PayloadMismatch("anomaly mix lists no types");
  MixPlan plan;
  std::vector<AnomalyType> ordered;
  for (AnomalyType t : kAllAnomalyTypes) {
    if (std::find(types.begin(), types.end(), t) != types.end()) ordered.push_back(t);
  }
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    plan.quotas[ordered[i]] = total / ordered.size() + (i < total % ordered.size() ? 1 : 0);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Payloads

using PayloadFactory = std::function<Payload(const Trajectory& gold, AnomalyType type, int target_step, Rng& rng)>;
using ContentFactory = std::function<std::string(const Trajectory& gold, const PerturbationSpec& spec)>;

// Domain-agnostic payloads built from the seed's own steps.
inline Payload generic_payload(const Trajectory& gold, AnomalyType type, int t, Rng& rng) {
  const Step& at = gold.steps[static_cast<std::size_t>(t - 1)];
  switch (type) {
  case AnomalyType::ReasoningError: {
    static const char* kTemplates[] = {
        "The last observation must be a glitch, so I will ignore it and go ahead with ",
        "The goal is basically satisfied already, so without checking anything I will just run ",
        "I remember doing this before and it always works, so there is no need to verify before ",
    };
    return FlawedReasoning{kTemplates[uniform_int(rng, 0, 2)] + at.action.raw + "."};
  }
  case AnomalyType::ExecutionError: {
    const std::string tool = at.action.tool.empty() ? std::string("act") : at.action.tool;
    return InvalidAction{tool + "(__missing__)", "Error: invalid argument '__missing__' for " + tool + "."};
  }
  case AnomalyType::Inefficiency: {
    RedundantSteps p;
    if (t >= 2 && uniform_int(rng, 0, 1) == 1) {
      const Step& before = gold.steps[static_cast<std::size_t>(t - 2)];
      p.pattern = RedundancyPattern::Detour;
      p.inserted_steps = {{"I should go back and redo the earlier step first.", before.action.raw, before.observation},
                          {"Now I return to where I was.", at.action.raw, at.observation}};
    } else {
      p.pattern = RedundancyPattern::Loop;
      p.inserted_steps = {{"Let me do that once more to be sure it worked.", at.action.raw, at.observation},
                          {"And once more, just to be certain.", at.action.raw, at.observation}};
    }
    return p;
  }
  case AnomalyType::FailureToRefuse: {
    ImpossibleConstraint p;
    const std::string tool = at.action.tool.empty() ? at.action.raw : at.action.tool;
    for (const ToolDescriptor& d : gold.available_tools) {
      if (d.name == tool) p.removed_tools.push_back(d.name);
    }
    p.conflicting_constraint = "Constraint: you must not use " + tool + " at any point.";
    return p;
  }
  case AnomalyType::RedundantContinuation: return CompletionSignal{};
  }
  throw PayloadMismatch("unknown anomaly type");
}

// ---------------------------------------------------------------------------
// Assembly

inline Dataset assemble_balanced(const std::vector<std::pair<Trajectory, LabeledTrajectory>>& pairs) {
  Dataset ds;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [gold, anomaly] = pairs[i];
    const std::string src = anomaly.label.source_id.value_or("");
    if (src != gold.id) {
      throw PairingError("pair " + std::to_string(i) + ": anomaly '" + anomaly.trajectory.id + "' has source_id '" +
                         src + "' but is paired with '" + gold.id + "'");
    }
    if (anomaly.label.verdict != Verdict::Anomaly) {
      throw PairingError("pair " + std::to_string(i) + ": '" + anomaly.trajectory.id + "' is not labeled Anomaly");
    }
    ds.add({gold, AnomalyLabel::normal()});
    ds.add(anomaly);
  }
  ds.set_convention("type_ii_first_error_step", "first inserted step (t+1)");
  ds.set_convention("first_error_step", "perturbed step t for I.a, I.b, III.a, III.b");
  return ds;
}

// ---------------------------------------------------------------------------
// Driver

struct PipelineConfig {
  std::uint64_t root_seed = 0;
  BandParams band;
  std::vector<std::string> refusal_phrases = default_refusal_phrases();
  // Empty means the even mix over all five subtypes.
  std::vector<AnomalyType> types;
};

struct PipelineResult {
  Dataset dataset;
  PipelineReport report;
  std::vector<std::pair<Trajectory, LabeledTrajectory>> pairs;
  std::vector<Rejection> rejected;
  std::vector<std::string> too_short;
  std::vector<std::pair<std::string, GenerationFailure>> failures;
};

inline ContentFactory default_content_factory() {
  return [](const Trajectory& gold, const PerturbationSpec& spec) { return default_error_content(spec, gold); };
}

// Filter, plan, perturb, complete, annotate and pair. One synthesis attempt
// per accepted seed; each seed draws from its own stream derived from the
// root seed and its id.
inline PipelineResult run_pipeline(const std::vector<Trajectory>& seeds, const Validator& validator,
                                   Generator& generator, const PipelineConfig& config,
                                   const PayloadFactory& payloads = generic_payload,
                                   const ContentFactory& contents = default_content_factory()) {
  PipelineResult out;
  FilterResult filtered = filter_seeds(seeds, validator);
  out.report = filtered.report;
  out.rejected = std::move(filtered.rejected);

  std::vector<const Trajectory*> usable;
  for (const Trajectory& t : filtered.accepted) {
    if (t.size() < 3) {
      out.too_short.push_back(t.id);
    } else {
      usable.push_back(&t);
    }
  }

  const MixPlan plan = config.types.empty() ? anomaly_mix_plan(usable.size())
                                            : restricted_mix_plan(usable.size(), config.types);
  std::vector<AnomalyType> assignment = plan.expand();
  Rng mix_rng = derive_rng(config.root_seed, "mix");
  shuffle(assignment, mix_rng);

  for (std::size_t i = 0; i < usable.size(); ++i) {
    const Trajectory& gold = *usable[i];
    Rng rng = derive_rng(config.root_seed, gold.id);
    PerturbationSpec spec;
    spec.anomaly_type = assignment[i];
    spec.target_step = sample_target_step(static_cast<int>(gold.size()), rng, config.band);
    spec.payload = payloads(gold, spec.anomaly_type, spec.target_step, rng);
    const PerturbedPrefix prefix = inject_perturbation(gold, spec);

    ++out.report.synthesis_attempts;
    Completion c = complete_trajectory(prefix, generator, config.refusal_phrases);
    if (auto* failure = std::get_if<GenerationFailure>(&c)) {
      out.report.record(*failure);
      out.failures.emplace_back(gold.id, *failure);
      continue;
    }
    ++out.report.synthesis_successes;
    out.pairs.emplace_back(gold, annotate(std::get<Trajectory>(c), spec, contents(gold, spec), gold.id));
  }
  out.dataset = assemble_balanced(out.pairs);
  return out;
}

} // namespace trajaudit::synth
