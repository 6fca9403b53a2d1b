// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "trajaudit/core/jsonl.hpp"
#include "trajaudit/core/runtime.hpp"

namespace trajaudit::monitor {

struct MonitorConfig {
  int check_interval = 1;  // k
  int retry_budget = 3;    // per step index
  int max_steps = 200;     // executed environment steps, retries included
  double tau = 0.2;
};

// Identity of the trajectory a run produces.
struct RunContext {
  std::string id = "run";
  std::string task;
  Domain domain = Domain::Embodied;
};

enum class RunStatus { Completed, RetryExhausted, StepBudget };

inline const char* to_string(RunStatus s) {
  switch (s) {
  case RunStatus::Completed: return "Completed";
  case RunStatus::RetryExhausted: return "Aborted.RetryExhausted";
  case RunStatus::StepBudget: return "Aborted.StepBudget";
  }
  return "";
}

struct RollbackEvent {
  int detected_at_step = 0;
  int rolled_back_to = 0;
  DiagnosticReport verifier_report;
};

struct RunOutcome {
  RunStatus status = RunStatus::Completed;
  Trajectory final_trajectory;
  int env_steps_executed = 0;
  std::vector<RollbackEvent> rollbacks;
  int steps_saved_vs_restart = 0;
  // Anomaly reports whose step could not be acted on (outside 1..n).
  std::vector<DiagnosticReport> ignored_reports;
};

class RunFailed : public EnvError {
public:
  RunFailed(const std::string& message, RunOutcome partial) : EnvError(message), partial_(std::move(partial)) {}
  const RunOutcome& partial() const { return partial_; }

private:
  RunOutcome partial_;
};

inline bool should_check(int step_count, int k) {
  if (k < 1) throw InvariantError("check interval must be at least 1");
  return step_count > 0 && step_count % k == 0;
}

// Restores checkpoint l-1 and drops every later one.
inline void rollback(Environment& env, std::vector<Checkpoint>& checkpoints, int l) {
  const int target = l - 1;
  auto it = std::find_if(checkpoints.begin(), checkpoints.end(),
                         [&](const Checkpoint& c) { return c.step_index == target; });
  if (l < 1 || it == checkpoints.end()) {
    throw MissingCheckpoint("no checkpoint for step " + std::to_string(target));
  }
  env.load(it->state_blob);
  checkpoints.erase(it + 1, checkpoints.end());
}

enum class Recovery { Rollback, Restart };

struct MonitorHooks {
  // Called after each rollback with the retained trajectory and the restored
  // environment.
  std::function<void(const Trajectory&, const Environment&)> after_rollback;
};

namespace detail {

inline RunOutcome run_loop(AgentPolicy& agent, Environment& env, Verifier* verifier, const MonitorConfig& config,
                           Recovery recovery, const RunContext& ctx, const MonitorHooks& hooks) {
  if (config.check_interval < 1) throw InvariantError("check_interval must be at least 1");
  if (config.max_steps < 1) throw InvariantError("max_steps must be at least 1");

  RunOutcome out;
  Trajectory& traj = out.final_trajectory;
  traj.id = ctx.id;
  traj.task = ctx.task;
  traj.domain = ctx.domain;
  env.reset();
  traj.instruction = env.instruction();
  traj.available_tools = env.tools();

  std::vector<Checkpoint> checkpoints{{0, env.snapshot()}};
  std::map<int, int> retries;

  while (true) {
    if (out.env_steps_executed >= config.max_steps) {
      out.status = RunStatus::StepBudget;
      return out;
    }
    const int n = static_cast<int>(traj.size()) + 1;
    const AgentTurn turn = agent.act(traj.instruction, traj.steps);
    EnvStep result;
    try {
      result = env.execute(turn.action);
    } catch (const EnvError& e) {
      throw RunFailed(e.what(), out);
    }
    ++out.env_steps_executed;
    traj.steps.push_back(make_step(n, turn.thought, turn.action, result.observation));
    checkpoints.push_back({n, env.snapshot()});

    if (verifier != nullptr && should_check(n, config.check_interval)) {
      DiagnosticReport report = verifier->audit(traj);
      if (report.verdict == Verdict::Anomaly) {
        const int l = report.error_step.value_or(0);
        if (l < 1 || l > n) {
          out.ignored_reports.push_back(std::move(report));
        } else {
          if (++retries[l] > config.retry_budget) {
            out.status = RunStatus::RetryExhausted;
            return out;
          }
          const int target = recovery == Recovery::Rollback ? l - 1 : 0;
          rollback(env, checkpoints, target + 1);
          traj.steps.resize(static_cast<std::size_t>(target));
          out.steps_saved_vs_restart += target;
          agent.on_rejection({l, report.error_content.value_or("")});
          out.rollbacks.push_back({n, target, std::move(report)});
          if (hooks.after_rollback) hooks.after_rollback(traj, env);
          continue;
        }
      }
    }
    if (result.terminal) {
      out.status = RunStatus::Completed;
      return out;
    }
  }
}

} // namespace detail

inline RunOutcome run_with_monitor(AgentPolicy& agent, Environment& env, Verifier& verifier,
                                   const MonitorConfig& config, const RunContext& ctx = {},
                                   const MonitorHooks& hooks = {}) {
  return detail::run_loop(agent, env, &verifier, config, Recovery::Rollback, ctx, hooks);
}

inline RunOutcome run_unmonitored(AgentPolicy& agent, Environment& env, const MonitorConfig& config,
                                  const RunContext& ctx = {}) {
  return detail::run_loop(agent, env, nullptr, config, Recovery::Rollback, ctx, {});
}

// Restart-from-scratch baseline: each detection restores the initial state.
inline RunOutcome run_with_restart(AgentPolicy& agent, Environment& env, Verifier& verifier,
                                   const MonitorConfig& config, const RunContext& ctx = {}) {
  return detail::run_loop(agent, env, &verifier, config, Recovery::Restart, ctx, {});
}

struct Comparison {
  RunOutcome monitored;
  RunOutcome restart_baseline;

  int extra_steps() const { return restart_baseline.env_steps_executed - monitored.env_steps_executed; }
};

using AgentFactory = std::function<std::unique_ptr<AgentPolicy>()>;
using EnvFactory = std::function<std::unique_ptr<Environment>()>;

// Both arms start from fresh agents and environments built by the factories.
inline Comparison compare_with_restart(const AgentFactory& make_agent, const EnvFactory& make_env, Verifier& verifier,
                                       const MonitorConfig& config, const RunContext& ctx = {}) {
  Comparison c;
  {
    auto agent = make_agent();
    auto env = make_env();
    c.monitored = run_with_monitor(*agent, *env, verifier, config, ctx);
  }
  {
    auto agent = make_agent();
    auto env = make_env();
    c.restart_baseline = run_with_restart(*agent, *env, verifier, config, ctx);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Run report JSONL: one line per rollback, then a summary line.

inline ojson report_json(const DiagnosticReport& r) {
  ojson o = ojson::object();
  o["verdict"] = std::string(to_string(r.verdict));
  o["error_step"] = r.error_step ? ojson(*r.error_step) : ojson(nullptr);
  o["error_content"] = r.error_content ? ojson(*r.error_content) : ojson(nullptr);
  return o;
}

inline std::vector<std::string> outcome_lines(const RunOutcome& o) {
  std::vector<std::string> lines;
  for (const RollbackEvent& e : o.rollbacks) {
    ojson j = ojson::object();
    j["event"] = "rollback";
    j["detected_at_step"] = e.detected_at_step;
    j["rolled_back_to"] = e.rolled_back_to;
    j["verifier_report"] = report_json(e.verifier_report);
    lines.push_back(j.dump(-1, ' ', false, json::error_handler_t::replace));
  }
  ojson s = ojson::object();
  s["event"] = "summary";
  s["status"] = to_string(o.status);
  s["env_steps_executed"] = o.env_steps_executed;
  s["rollbacks"] = o.rollbacks.size();
  s["steps_saved_vs_restart"] = o.steps_saved_vs_restart;
  s["ignored_reports"] = o.ignored_reports.size();
  s["final_trajectory"] = trajectory_fields_json(o.final_trajectory);
  lines.push_back(s.dump(-1, ' ', false, json::error_handler_t::replace));
  return lines;
}

} // namespace trajaudit::monitor
