// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "trajaudit/core/errors.hpp"
#include "trajaudit/core/jsonl.hpp"
#include "trajaudit/core/types.hpp"

namespace trajaudit {

// Describes where a seed-corpus record keeps each trajectory component.
//
// Conversation layout (the default) expects a list of turns such as
//   {"id": ..., "conversations": [{"from": "human", "value": <instruction>},
//                                 {"from": "gpt", "value": "Thought: ...\nAction: ..."},
//                                 {"from": "human", "value": "Observation: ..."}, ...]}
// StepRecords layout expects an instruction field plus a list of objects with
// one key per component.
struct FieldMapping {
  enum class Layout { Conversation, StepRecords };

  std::string name = "agentbank-conversation";
  Layout layout = Layout::Conversation;
  bool strict = true;

  std::string id_field = "id";
  std::string domain_field = "domain";
  std::string task_field = "task";
  std::optional<Domain> default_domain;
  std::optional<std::string> default_task;

  // Conversation layout.
  std::string conversation_field = "conversations";
  std::string role_key = "from";
  std::string content_key = "value";
  std::string user_role = "human";
  std::string assistant_role = "gpt";
  std::string thought_prefix = "Thought:";
  std::string action_prefix = "Action:";
  std::string observation_prefix = "Observation:";

  // StepRecords layout.
  std::string instruction_field = "instruction";
  std::string steps_field = "steps";
  std::string thought_key = "thought";
  std::string action_key = "action";
  std::string observation_key = "observation";
};

namespace detail {

inline std::string strip_prefix(std::string_view text, std::string_view prefix) {
  std::string t = trim(text);
  if (!prefix.empty() && std::string_view(t).substr(0, prefix.size()) == prefix) {
    return trim(std::string_view(t).substr(prefix.size()));
  }
  return t;
}

inline std::string record_id_of(const json& rec, const FieldMapping& m) {
  auto it = rec.find(m.id_field);
  if (it == rec.end() || it->is_null()) throw MappingError("field '" + m.id_field + "' absent");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw MappingError("field '" + m.id_field + "' is neither string nor integer");
}

inline std::string mapped_string(const json& obj, const std::string& key, const std::string& what,
                                 const std::string& id) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw MappingError(what + ": declared field '" + key + "' absent (record '" + id + "')");
  }
  if (!it->is_string()) throw MappingError(what + ": field '" + key + "' is not text (record '" + id + "')");
  return it->get<std::string>();
}

// Splits an assistant turn into (thought, action). Returns nullopt for the
// action when the action marker is missing.
inline std::pair<std::string, std::optional<std::string>> split_turn(const std::string& content,
                                                                     const FieldMapping& m) {
  const auto apos = content.find(m.action_prefix);
  if (apos == std::string::npos) return {strip_prefix(content, m.thought_prefix), std::nullopt};
  std::string thought = strip_prefix(std::string_view(content).substr(0, apos), m.thought_prefix);
  std::string action = trim(std::string_view(content).substr(apos + m.action_prefix.size()));
  return {std::move(thought), std::move(action)};
}

} // namespace detail

inline Trajectory import_agentbank_record(std::string_view record, const FieldMapping& mapping = {}) {
  json rec;
  try {
    rec = json::parse(record);
  } catch (const json::parse_error& e) {
    throw MappingError(std::string("record is not valid JSON: ") + e.what());
  }
  if (!rec.is_object()) throw MappingError("record is not a JSON object");

  Trajectory t;
  t.id = detail::record_id_of(rec, mapping);

  if (auto it = rec.find(mapping.domain_field); it != rec.end() && it->is_string()) {
    const auto d = domain_from_string(it->get<std::string>());
    if (!d) throw MappingError("unknown domain '" + it->get<std::string>() + "' (record '" + t.id + "')");
    t.domain = *d;
  } else if (mapping.default_domain) {
    t.domain = *mapping.default_domain;
  } else {
    throw MappingError("domain: declared field '" + mapping.domain_field + "' absent (record '" + t.id + "')");
  }
  if (auto it = rec.find(mapping.task_field); it != rec.end() && it->is_string()) {
    t.task = it->get<std::string>();
  } else if (mapping.default_task) {
    t.task = *mapping.default_task;
  } else {
    throw MappingError("task: declared field '" + mapping.task_field + "' absent (record '" + t.id + "')");
  }

  bool missing_reasoning = false;
  auto add_step = [&](std::string thought, std::string action, std::string observation) {
    if (thought.empty()) missing_reasoning = true;
    t.steps.push_back(make_step(static_cast<int>(t.steps.size()) + 1, std::move(thought), action,
                                std::move(observation)));
  };

  if (mapping.layout == FieldMapping::Layout::Conversation) {
    auto conv = rec.find(mapping.conversation_field);
    if (conv == rec.end() || !conv->is_array()) {
      throw MappingError("conversation: declared field '" + mapping.conversation_field + "' absent (record '" +
                         t.id + "')");
    }
    struct Turn {
      std::string role;
      std::string content;
    };
    std::vector<Turn> turns;
    for (const json& turn : *conv) {
      if (!turn.is_object()) throw MappingError("conversation turn is not an object (record '" + t.id + "')");
      turns.push_back({detail::mapped_string(turn, mapping.role_key, "turn role", t.id),
                       detail::mapped_string(turn, mapping.content_key, "turn content", t.id)});
    }
    std::size_t i = 0;
    if (i < turns.size() && turns[i].role == mapping.user_role) t.instruction = detail::trim(turns[i++].content);
    while (i < turns.size()) {
      if (turns[i].role != mapping.assistant_role) {
        if (mapping.strict) {
          throw MappingError("turn " + std::to_string(i) + ": expected role '" + mapping.assistant_role +
                             "' (record '" + t.id + "')");
        }
        ++i;
        continue;
      }
      auto [thought, action] = detail::split_turn(turns[i].content, mapping);
      if (!action) {
        if (mapping.strict) {
          throw MappingError("turn " + std::to_string(i) + ": action marker '" + mapping.action_prefix +
                             "' absent (record '" + t.id + "')");
        }
        action = detail::trim(turns[i].content);
        thought.clear();
      }
      std::string observation;
      if (i + 1 < turns.size() && turns[i + 1].role == mapping.user_role) {
        observation = detail::strip_prefix(turns[i + 1].content, mapping.observation_prefix);
        i += 2;
      } else {
        if (mapping.strict) {
          throw MappingError("turn " + std::to_string(i) + ": observation turn absent (record '" + t.id + "')");
        }
        i += 1;
      }
      if (action->empty()) action = "noop";
      add_step(std::move(thought), std::move(*action), std::move(observation));
    }
  } else {
    t.instruction = detail::mapped_string(rec, mapping.instruction_field, "instruction", t.id);
    auto steps = rec.find(mapping.steps_field);
    if (steps == rec.end() || !steps->is_array()) {
      throw MappingError("steps: declared field '" + mapping.steps_field + "' absent (record '" + t.id + "')");
    }
    for (const json& s : *steps) {
      if (!s.is_object()) throw MappingError("step is not an object (record '" + t.id + "')");
      std::string thought;
      if (auto it = s.find(mapping.thought_key); it != s.end() && it->is_string()) thought = it->get<std::string>();
      std::string action = detail::mapped_string(s, mapping.action_key, "action", t.id);
      std::string observation;
      if (mapping.strict) {
        observation = detail::mapped_string(s, mapping.observation_key, "observation", t.id);
      } else if (auto it = s.find(mapping.observation_key); it != s.end() && it->is_string()) {
        observation = it->get<std::string>();
      }
      add_step(std::move(thought), action.empty() ? "noop" : std::move(action), std::move(observation));
    }
  }

  t.metadata["source"] = "agentbank";
  t.metadata["source_record"] = t.id;
  t.metadata["mapping"] = mapping.name;
  if (missing_reasoning) t.metadata[std::string(kNoReasoningKey)] = "true";
  if (t.steps.empty()) t.metadata[std::string(kDegenerateKey)] = "true";
  validate(t);
  return t;
}

} // namespace trajaudit
