// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trajaudit/core/runtime.hpp"
#include "trajaudit/scriptenv/tasks.hpp"
#include "trajaudit/synth/pipeline.hpp"
#include "trajaudit/synth/perturbation.hpp"

namespace trajaudit::scriptenv {

struct Replay {
  std::vector<WorldState> states;  // states[i] is the state after action i+1
  std::vector<std::string> observations;
  WorldState initial;
};

inline Replay replay(const TaskSpec& task, const std::vector<std::string>& actions) {
  Replay r;
  r.initial = reset(task);
  WorldState s = r.initial;
  for (const std::string& a : actions) {
    Transition t = step(task, s, a);
    s = std::move(t.state);
    r.states.push_back(s);
    r.observations.push_back(std::move(t.observation));
  }
  return r;
}

inline std::vector<std::string> actions_of(const Trajectory& t) {
  std::vector<std::string> out;
  for (const Step& s : t.steps) out.push_back(s.action.raw);
  return out;
}

inline std::vector<std::string> golden_actions(const TaskSpec& task) {
  std::vector<std::string> out;
  for (const ScriptStep& s : task.golden) out.push_back(s.action);
  return out;
}

inline Trajectory golden_run(const TaskSpec& task) {
  const Replay r = replay(task, golden_actions(task));
  Trajectory t;
  t.id = task.name + "-golden";
  t.instruction = task.instruction;
  t.available_tools = tool_descriptors();
  t.domain = task.domain;
  t.task = task.name;
  t.metadata["source"] = "scriptenv";
  for (std::size_t i = 0; i < task.golden.size(); ++i) {
    t.steps.push_back(make_step(static_cast<int>(i) + 1, task.golden[i].thought, task.golden[i].action,
                                r.observations[i]));
  }
  return t;
}

inline Trajectory golden_run(const TaskRegistry& registry, const std::string& name) {
  return golden_run(registry.get(name));
}

// A live episode over one task, exposed through the generic Environment
// interface used by the monitor.
class Session : public Environment {
public:
  explicit Session(TaskSpec task) : task_(std::move(task)), state_(scriptenv::reset(task_)) {}

  std::string instruction() const override { return task_.instruction; }
  std::vector<ToolDescriptor> tools() const override { return tool_descriptors(); }
  void reset() override { state_ = scriptenv::reset(task_); }

  EnvStep execute(const std::string& action) override {
    Transition t = step(task_, state_, action);
    state_ = std::move(t.state);
    return {std::move(t.observation), state_.terminal};
  }

  std::string snapshot() const override { return encode_state(state_); }
  void load(const std::string& blob) override { state_ = decode_state(blob); }

  const WorldState& state() const { return state_; }
  const TaskSpec& task() const { return task_; }

private:
  TaskSpec task_;
  WorldState state_;
};

// ---------------------------------------------------------------------------
// Scripted agent

enum class OnRejection { SkipFaultyAction, ReplayGolden };

struct ScriptedAgentSpec {
  std::vector<ScriptStep> golden_script;
  std::optional<synth::PerturbationSpec> injection;
  OnRejection on_rejection = OnRejection::ReplayGolden;
};

// Plays a fixed script by position in the history. An injection perturbs the
// script (I.a thought, I.b action, II inserted steps). After a rejection the
// agent either drops back to the golden script or repairs only the flagged
// entry.
class ScriptedAgent : public AgentPolicy {
public:
  explicit ScriptedAgent(ScriptedAgentSpec spec) : spec_(std::move(spec)) {
    for (std::size_t i = 0; i < spec_.golden_script.size(); ++i) script_.push_back({spec_.golden_script[i], i});
    if (spec_.injection) inject(*spec_.injection);
  }

  AgentTurn act(const std::string&, const std::vector<Step>& history) override {
    const std::size_t pos = history.size();
    if (pos < script_.size()) return {script_[pos].step.thought, script_[pos].step.action};
    return {"There is nothing left in my plan.", "Done()"};
  }

  void on_rejection(const RejectionNote& note) override {
    notes_.push_back(note);
    if (spec_.on_rejection == OnRejection::ReplayGolden) {
      script_.clear();
      for (std::size_t i = 0; i < spec_.golden_script.size(); ++i) script_.push_back({spec_.golden_script[i], i});
      return;
    }
    const auto pos = static_cast<std::size_t>(note.step - 1);
    if (note.step < 1 || pos >= script_.size()) return;
    if (script_[pos].golden_index) {
      script_[pos].step = spec_.golden_script[*script_[pos].golden_index];
    } else {
      script_.erase(script_.begin() + static_cast<std::ptrdiff_t>(pos));
    }
  }

  const std::vector<RejectionNote>& notes() const { return notes_; }

private:
  struct Entry {
    ScriptStep step;
    std::optional<std::size_t> golden_index;  // empty for inserted steps
  };

  void inject(const synth::PerturbationSpec& spec) {
    const int t = spec.target_step;
    if (t < 1 || t > static_cast<int>(script_.size())) {
      throw IndexError("injection step " + std::to_string(t) + " outside the script");
    }
    Entry& e = script_[static_cast<std::size_t>(t - 1)];
    if (const auto* p = std::get_if<synth::FlawedReasoning>(&spec.payload)) {
      e.step.thought = p->flawed_thought;
    } else if (const auto* p = std::get_if<synth::InvalidAction>(&spec.payload)) {
      e.step.action = p->bad_action;
    } else if (const auto* p = std::get_if<synth::RedundantSteps>(&spec.payload)) {
      std::vector<Entry> inserted;
      for (const synth::StepDraft& d : p->inserted_steps) inserted.push_back({{d.thought, d.action}, std::nullopt});
      script_.insert(script_.begin() + t, inserted.begin(), inserted.end());
    } else {
      throw PayloadMismatch("scripted agents only act out I.a, I.b and II injections");
    }
  }

  ScriptedAgentSpec spec_;
  std::vector<Entry> script_;
  std::vector<RejectionNote> notes_;
};

inline ScriptedAgentSpec golden_agent_spec(const TaskSpec& task) { return {task.golden, std::nullopt, OnRejection::ReplayGolden}; }

// ---------------------------------------------------------------------------
// Synthesis over scriptenv seeds

// Payloads whose observations come from the environment itself. Type II
// always repeats a_t (a no-op on repeat) so the first inserted step revisits
// the (action, state) pair of step t.
inline synth::Payload scriptenv_payload(const TaskRegistry& registry, const Trajectory& gold, AnomalyType type, int t,
                                        Rng& rng) {
  const TaskSpec& task = registry.get(gold.task);
  const std::vector<std::string> actions = actions_of(gold);
  const Step& at = gold.steps[static_cast<std::size_t>(t - 1)];
  switch (type) {
  case AnomalyType::ExecutionError: {
    std::vector<std::string> args;
    for (int i = 0; at.action.args.count(std::to_string(i)); ++i) args.push_back(at.action.args.at(std::to_string(i)));
    if (args.empty()) {
      args.push_back("Nowhere");
    } else {
      args.back() = "Nowhere";
    }
    std::string bad = at.action.tool + "(";
    for (std::size_t i = 0; i < args.size(); ++i) bad += (i ? ", " : "") + args[i];
    bad += ")";
    const Replay before = replay(task, {actions.begin(), actions.begin() + (t - 1)});
    const WorldState& s = before.states.empty() ? before.initial : before.states.back();
    return synth::InvalidAction{bad, step(task, s, bad).observation};
  }
  case AnomalyType::Inefficiency: {
    const Replay upto = replay(task, {actions.begin(), actions.begin() + t});
    const std::string obs = step(task, upto.states.back(), at.action.raw).observation;
    return synth::RedundantSteps{{{"Let me do that once more to be sure it worked.", at.action.raw, obs},
                                  {"Once more, to be completely certain.", at.action.raw, obs}},
                                 synth::RedundancyPattern::Loop};
  }
  default: return synth::generic_payload(gold, type, t, rng);
  }
}

// Replays the perturbed prefix, then continues with the golden script's
// remaining steps, taking every observation from the environment.
class ScriptEnvGenerator : public synth::Generator {
public:
  explicit ScriptEnvGenerator(const TaskRegistry& registry) : registry_(registry) {}

  synth::Continuation continue_from(const synth::PerturbedPrefix& p) override {
    if (!registry_.contains(p.source.task)) {
      return synth::GenerationFailure{synth::GenerationFailure::Kind::ParseFailure,
                                      "no scriptenv task named '" + p.source.task + "'"};
    }
    const TaskSpec& task = registry_.get(p.source.task);
    std::vector<std::string> actions;
    for (const Step& s : p.prefix) actions.push_back(s.action.raw);
    const Replay r = replay(task, actions);
    WorldState s = r.states.empty() ? r.initial : r.states.back();
    std::vector<synth::StepDraft> out;
    for (std::size_t i = static_cast<std::size_t>(p.spec.target_step); i < p.source.steps.size(); ++i) {
      const Step& g = p.source.steps[i];
      Transition t = step(task, s, g.action.raw);
      s = std::move(t.state);
      out.push_back({g.thought, g.action.raw, std::move(t.observation)});
    }
    return out;
  }

private:
  const TaskRegistry& registry_;
};

// The two-toggle loop after the step-7 toggle of the clean-plate run.
inline synth::PerturbedPrefix redundant_cleaning_prefix(const TaskRegistry& registry) {
  const Trajectory gold = golden_run(registry, "clean-plate");
  synth::PerturbationSpec spec;
  spec.anomaly_type = AnomalyType::Inefficiency;
  spec.target_step = 7;
  Rng unused(0);
  synth::Payload payload = scriptenv_payload(registry, gold, AnomalyType::Inefficiency, 7, unused);
  auto& loop = std::get<synth::RedundantSteps>(payload);
  loop.inserted_steps[0].thought = "I should run the faucet again to make sure the plate is really clean.";
  loop.inserted_steps[1].thought = "One more rinse to be safe.";
  spec.payload = payload;
  return synth::inject_perturbation(gold, spec);
}

// Completed with the environment: 16 steps labeled (II, 8, "Redundant Cleaning").
inline LabeledTrajectory redundant_cleaning_example(const TaskRegistry& registry) {
  const synth::PerturbedPrefix prefix = redundant_cleaning_prefix(registry);
  ScriptEnvGenerator generator(registry);
  synth::Completion c = synth::complete_trajectory(prefix, generator);
  return synth::annotate(std::get<Trajectory>(c), prefix.spec, "Redundant Cleaning", prefix.source.id);
}

} // namespace trajaudit::scriptenv
