// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trajaudit/core/errors.hpp"

namespace trajaudit {

using TextMap = std::map<std::string, std::string>;

// Metadata key marking trajectories whose source format carries no reasoning;
// only those may contain steps with an empty thought.
inline constexpr std::string_view kNoReasoningKey = "no_reasoning";
// Metadata key set on n=0 trajectories by importers.
inline constexpr std::string_view kDegenerateKey = "degenerate";

struct Action {
  std::string tool;
  TextMap args;
  std::string raw;

  bool operator==(const Action&) const = default;
};

struct Step {
  int index = 1;
  std::string thought;
  Action action;
  std::string observation;

  bool operator==(const Step&) const = default;
};

struct ToolDescriptor {
  std::string name;
  std::string signature;

  bool operator==(const ToolDescriptor&) const = default;
};

enum class Domain { Math, Reasoning, Coding, Web, Embodied };

inline constexpr std::array<Domain, 5> kAllDomains = {Domain::Math, Domain::Reasoning, Domain::Coding,
                                                      Domain::Web, Domain::Embodied};

inline std::string_view to_string(Domain d) {
  switch (d) {
  case Domain::Math: return "math";
  case Domain::Reasoning: return "reasoning";
  case Domain::Coding: return "coding";
  case Domain::Web: return "web";
  case Domain::Embodied: return "embodied";
  }
  return "unknown";
}

inline std::optional<Domain> domain_from_string(std::string_view s) {
  for (Domain d : kAllDomains) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

struct Trajectory {
  std::string id;
  std::string instruction;
  std::vector<ToolDescriptor> available_tools;
  std::vector<Step> steps;
  Domain domain = Domain::Embodied;
  std::string task;
  TextMap metadata;

  std::size_t size() const noexcept { return steps.size(); }
  bool operator==(const Trajectory&) const = default;
};

enum class AnomalyType {
  ReasoningError,          // I.a
  ExecutionError,          // I.b
  Inefficiency,            // II
  FailureToRefuse,         // III.a
  RedundantContinuation,   // III.b
};

inline constexpr std::array<AnomalyType, 5> kAllAnomalyTypes = {
    AnomalyType::ReasoningError, AnomalyType::ExecutionError, AnomalyType::Inefficiency,
    AnomalyType::FailureToRefuse, AnomalyType::RedundantContinuation};

inline std::string_view to_string(AnomalyType t) {
  switch (t) {
  case AnomalyType::ReasoningError: return "I.a";
  case AnomalyType::ExecutionError: return "I.b";
  case AnomalyType::Inefficiency: return "II";
  case AnomalyType::FailureToRefuse: return "III.a";
  case AnomalyType::RedundantContinuation: return "III.b";
  }
  return "?";
}

inline std::optional<AnomalyType> anomaly_type_from_string(std::string_view s) {
  for (AnomalyType t : kAllAnomalyTypes) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

// Top-level category: 1 (task failure), 2 (inefficiency), 3 (unwarranted continuation).
inline int category_of(AnomalyType t) {
  switch (t) {
  case AnomalyType::ReasoningError:
  case AnomalyType::ExecutionError: return 1;
  case AnomalyType::Inefficiency: return 2;
  case AnomalyType::FailureToRefuse:
  case AnomalyType::RedundantContinuation: return 3;
  }
  return 0;
}

enum class Verdict { Normal, Anomaly };

inline std::string_view to_string(Verdict v) { return v == Verdict::Anomaly ? "anomaly" : "normal"; }

inline std::optional<Verdict> verdict_from_string(std::string_view s) {
  if (s == "normal") return Verdict::Normal;
  if (s == "anomaly") return Verdict::Anomaly;
  return std::nullopt;
}

struct AnomalyLabel {
  Verdict verdict = Verdict::Normal;
  std::optional<AnomalyType> anomaly_type;
  std::optional<int> first_error_step;
  std::optional<std::string> error_content;
  std::optional<std::string> source_id;

  static AnomalyLabel normal() { return {}; }
  static AnomalyLabel anomaly(AnomalyType type, int step, std::string content,
                              std::optional<std::string> source = std::nullopt) {
    return {Verdict::Anomaly, type, step, std::move(content), std::move(source)};
  }

  bool operator==(const AnomalyLabel&) const = default;
};

struct LabeledTrajectory {
  Trajectory trajectory;
  AnomalyLabel label;

  bool operator==(const LabeledTrajectory&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

inline void validate(const Trajectory& t) {
  const std::string where = " (record '" + t.id + "')";
  if (t.id.empty()) throw InvariantError("id: must be non-empty" + where);
  if (t.task.empty()) throw InvariantError("task: must be non-empty" + where);
  const auto flag = t.metadata.find(std::string(kNoReasoningKey));
  const bool no_reasoning = flag != t.metadata.end() && flag->second == "true";
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const Step& s = t.steps[i];
    const std::string field = "steps[" + std::to_string(i) + "]";
    if (s.index != static_cast<int>(i) + 1) {
      throw InvariantError(field + ".index: expected " + std::to_string(i + 1) + ", got " +
                           std::to_string(s.index) + where);
    }
    if (s.action.raw.empty()) throw InvariantError(field + ".action.raw: must be non-empty" + where);
    if (s.thought.empty() && !no_reasoning) {
      throw InvariantError(field + ".thought: empty thought requires metadata no_reasoning=true" + where);
    }
  }
}

inline void validate(const AnomalyLabel& l, std::size_t n, const std::string& record_id) {
  const std::string where = " (record '" + record_id + "')";
  if (l.verdict == Verdict::Normal) {
    if (l.anomaly_type || l.first_error_step || l.error_content) {
      throw InvariantError("label: normal verdict must not carry anomaly fields" + where);
    }
    return;
  }
  if (!l.anomaly_type) throw InvariantError("label.anomaly_type: required for anomaly verdict" + where);
  if (!l.first_error_step) throw InvariantError("label.first_error_step: required for anomaly verdict" + where);
  if (!l.error_content) throw InvariantError("label.error_content: required for anomaly verdict" + where);
  const int step = *l.first_error_step;
  if (step < 1 || static_cast<std::size_t>(step) > n) {
    throw InvariantError("label.first_error_step: " + std::to_string(step) + " outside 1.." + std::to_string(n) +
                         where);
  }
}

inline void validate(const LabeledTrajectory& item) {
  validate(item.trajectory);
  validate(item.label, item.trajectory.size(), item.trajectory.id);
}

// ---------------------------------------------------------------------------
// Actions

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Splits on commas that are not nested inside brackets or quotes.
inline std::vector<std::string> split_top_level(std::string_view s) {
  std::vector<std::string> out;
  int depth = 0;
  char quote = 0;
  std::string cur;
  for (char c : s) {
    if (quote) {
      if (c == quote) quote = 0;
      cur += c;
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}') {
      --depth;
    } else if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
      continue;
    }
    cur += c;
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

} // namespace detail

// Best-effort structured parse of an action string such as
// "Put(Plate, Cabinet)", "search[query]" or "click". Positional arguments are
// keyed "0", "1", ...; "key=value" arguments keep their key. Anything that
// does not look like a call keeps only its raw text and first token as tool.
inline Action parse_action(std::string_view raw) {
  Action a;
  a.raw = std::string(raw);
  const std::string text = detail::trim(raw);
  std::size_t name_end = 0;
  while (name_end < text.size() &&
         (std::isalnum(static_cast<unsigned char>(text[name_end])) || text[name_end] == '_' ||
          text[name_end] == '.' || text[name_end] == '-')) {
    ++name_end;
  }
  a.tool = text.substr(0, name_end);
  if (name_end == 0 || name_end == text.size()) return a;

  std::size_t open = name_end;
  while (open < text.size() && text[open] == ' ') ++open;
  if (open >= text.size()) return a;
  const char opener = text[open];
  const char closer = opener == '(' ? ')' : opener == '[' ? ']' : '\0';
  if (closer == '\0' || text.back() != closer) return a;

  const std::string inner = text.substr(open + 1, text.size() - open - 2);
  std::size_t position = 0;
  for (const std::string& part : detail::split_top_level(inner)) {
    const auto eq = part.find('=');
    const bool keyed = eq != std::string::npos && eq > 0 &&
                       part.find_first_of("\"'([{") > eq;
    if (keyed) {
      a.args[detail::trim(part.substr(0, eq))] = detail::trim(part.substr(eq + 1));
    } else {
      a.args[std::to_string(position++)] = part;
    }
  }
  return a;
}

inline Step make_step(int index, std::string thought, std::string_view action_raw, std::string observation) {
  return Step{index, std::move(thought), parse_action(action_raw), std::move(observation)};
}

// Reassigns 1..n indices in order.
inline void reindex(std::vector<Step>& steps) {
  for (std::size_t i = 0; i < steps.size(); ++i) steps[i].index = static_cast<int>(i) + 1;
}

} // namespace trajaudit
