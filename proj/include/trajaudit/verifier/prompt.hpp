// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trajaudit/core/errors.hpp"
#include "trajaudit/core/types.hpp"

namespace trajaudit::verifier {

// Three sections: system text, a task header and a per-step block. In a
// template file they are separated by lines reading "---task---" and
// "---step---".
struct PromptTemplate {
  std::string version;
  std::string system;
  std::string task_header;
  std::string step;
};

struct AuditPrompt {
  std::string system_instruction;
  std::string rendered_trajectory;
  std::size_t token_estimate = 0;
};

inline constexpr const char* kDefaultTemplateText = R"tpl(You audit the execution trajectory of a tool-using agent. Read the task and every step, then decide whether the trajectory is normal or anomalous.

A trajectory is anomalous if any step shows one of:
- a reasoning error: the thought is wrong even if the action is valid
- an execution error: the action is invalid or raises an error
- an inefficiency: steps that loop or detour without changing the outcome
- a failure to refuse: the agent continues a task that is impossible under its constraints
- continuation after completion: the agent keeps acting after the task was already completed

Report the first anomalous step only. Answer with exactly one JSON object and nothing else:
{"verdict": "normal" | "anomaly", "error_step": <step number or null>, "error_content": "<what went wrong, or null>"}
For a normal trajectory, error_step and error_content are null.
---task---
Task: {instruction}
Available tools: {tools}
---step---
[Step {index}]
Thought: {thought}
Action: {action}
Observation: {observation}
)tpl";

namespace detail {

// Continuation lines of a field are indented by two spaces and a leading '['
// or '\\' is escaped, so content can never produce a line that reads as a step
// header or a field label.
inline std::string escape_block(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  if (!s.empty() && (s[0] == '[' || s[0] == '\\')) out += '\\';
  for (char c : s) {
    out += c;
    if (c == '\n') out += "  ";
  }
  return out;
}

inline std::string render(const std::string& tpl, const std::set<std::string>& allowed,
                          const std::function<std::string(const std::string&)>& value) {
  std::string out;
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const std::size_t close = tpl.find('}', i);
      const std::string name = close == std::string::npos ? "" : tpl.substr(i + 1, close - i - 1);
      const bool identifier = !name.empty() && name.find_first_not_of("abcdefghijklmnopqrstuvwxyz_") == std::string::npos;
      if (identifier) {
        if (!allowed.count(name)) throw TemplateError("unknown placeholder {" + name + "}");
        out += value(name);
        i = close + 1;
        continue;
      }
    }
    out += tpl[i++];
  }
  return out;
}

inline void check_placeholders(const std::string& tpl, const std::set<std::string>& allowed) {
  render(tpl, allowed, [](const std::string&) { return std::string(); });
}

} // namespace detail

inline PromptTemplate parse_template(const std::string& text, std::string version = "custom") {
  PromptTemplate t;
  t.version = std::move(version);
  std::istringstream in(text);
  std::string line;
  std::string* section = &t.system;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "---task---") {
      section = &t.task_header;
      continue;
    }
    if (line == "---step---") {
      section = &t.step;
      continue;
    }
    *section += line + "\n";
  }
  if (t.step.empty()) throw TemplateError("template has no ---step--- section");
  while (!t.system.empty() && t.system.back() == '\n') t.system.pop_back();
  detail::check_placeholders(t.system, {});
  detail::check_placeholders(t.task_header, {"instruction", "tools"});
  detail::check_placeholders(t.step, {"index", "thought", "action", "observation"});
  return t;
}

inline PromptTemplate default_template() { return parse_template(kDefaultTemplateText, "audit-v1"); }

inline PromptTemplate load_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot open template " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_template(buf.str(), path);
}

inline AuditPrompt build_audit_prompt(const Trajectory& t, const PromptTemplate& tpl) {
  AuditPrompt p;
  p.system_instruction = tpl.system;
  std::string tools;
  for (const ToolDescriptor& d : t.available_tools) {
    tools += (tools.empty() ? "" : ", ") + (d.signature.empty() ? d.name : d.signature);
  }
  if (tools.empty()) tools = "(none listed)";
  p.rendered_trajectory = detail::render(tpl.task_header, {"instruction", "tools"}, [&](const std::string& k) {
    return k == "instruction" ? detail::escape_block(t.instruction) : detail::escape_block(tools);
  });
  for (const Step& s : t.steps) {
    p.rendered_trajectory += detail::render(tpl.step, {"index", "thought", "action", "observation"},
                                            [&](const std::string& k) -> std::string {
                                              if (k == "index") return std::to_string(s.index);
                                              if (k == "thought") return detail::escape_block(s.thought);
                                              if (k == "action") return detail::escape_block(s.action.raw);
                                              return detail::escape_block(s.observation);
                                            });
  }
  p.token_estimate = (p.system_instruction.size() + p.rendered_trajectory.size() + 3) / 4;
  return p;
}

} // namespace trajaudit::verifier
