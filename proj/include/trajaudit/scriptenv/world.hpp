// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajaudit/core/digest.hpp"
#include "trajaudit/core/errors.hpp"
#include "trajaudit/core/jsonl.hpp"
#include "trajaudit/core/runtime.hpp"
#include "trajaudit/core/types.hpp"

namespace trajaudit::scriptenv {

// Location value for an object in the agent's hands.
inline constexpr const char* kHeld = "Agent";
inline constexpr const char* kCompletedObservation = "Task Completed.";

struct ObjectState {
  std::string location;
  std::map<std::string, bool> attributes;

  bool operator==(const ObjectState&) const = default;
};

struct WorldState {
  std::string task;
  std::string agent_location;
  std::map<std::string, ObjectState> objects;
  bool terminal = false;
  bool completed_goal = false;

  bool operator==(const WorldState&) const = default;
};

// ---------------------------------------------------------------------------
// Task data

struct ObjectSpec {
  std::string location;
  bool portable = false;
  std::map<std::string, bool> attributes;
};

// Toggling `object` while `target` sits at `place` sets target.attribute.
struct ToggleEffect {
  std::string object;
  std::string target;
  std::string place;
  std::string attribute;
};

struct GoalSpec {
  std::string object;
  std::string location;
  std::map<std::string, bool> attributes;
};

struct ScriptStep {
  std::string thought;
  std::string action;
};

struct TaskSpec {
  std::string name;
  std::string instruction;
  Domain domain = Domain::Embodied;
  std::string start;
  std::vector<std::string> places;
  std::map<std::string, ObjectSpec> objects;
  std::vector<ToggleEffect> toggles;
  GoalSpec goal;
  std::vector<ScriptStep> golden;
};

inline std::map<std::string, bool> bool_map(const json& j) {
  std::map<std::string, bool> out;
  for (const auto& [k, v] : j.items()) out[k] = v.get<bool>();
  return out;
}

inline TaskSpec task_from_json(const json& j) {
  try {
    TaskSpec t;
    t.name = j.at("name").get<std::string>();
    t.instruction = j.at("instruction").get<std::string>();
    const std::string domain = j.value("domain", std::string("embodied"));
    const auto d = domain_from_string(domain);
    if (!d) throw SchemaError("task " + t.name + ": unknown domain '" + domain + "'");
    t.domain = *d;
    t.start = j.at("start").get<std::string>();
    t.places = j.at("places").get<std::vector<std::string>>();
    for (const auto& [name, o] : j.at("objects").items()) {
      t.objects[name] = {o.at("location").get<std::string>(), o.value("portable", false),
                         bool_map(o.value("attributes", json::object()))};
    }
    for (const auto& e : j.value("toggles", json::array())) {
      t.toggles.push_back({e.at("object").get<std::string>(), e.at("target").get<std::string>(),
                           e.at("place").get<std::string>(), e.at("attribute").get<std::string>()});
    }
    const json& g = j.at("goal");
    t.goal = {g.at("object").get<std::string>(), g.at("location").get<std::string>(),
              bool_map(g.value("attributes", json::object()))};
    for (const auto& s : j.at("golden")) {
      t.golden.push_back({s.at("thought").get<std::string>(), s.at("action").get<std::string>()});
    }
    return t;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("task spec: ") + e.what());
  }
}

inline WorldState reset(const TaskSpec& task) {
  WorldState s;
  s.task = task.name;
  s.agent_location = task.start;
  for (const auto& [name, spec] : task.objects) s.objects[name] = {spec.location, spec.attributes};
  return s;
}

inline std::vector<ToolDescriptor> tool_descriptors() {
  return {{"Look", "Look()"},
          {"GoTo", "GoTo(place)"},
          {"Examine", "Examine(object)"},
          {"PickUp", "PickUp(object)"},
          {"Put", "Put(object, place)"},
          {"Open", "Open(object)"},
          {"Close", "Close(object)"},
          {"ToggleObject", "ToggleObject(object)"},
          {"Done", "Done()"}};
}

// ---------------------------------------------------------------------------
// Serialization and checkpoints

inline ojson state_to_json(const WorldState& s) {
  ojson objects = ojson::object();
  for (const auto& [name, o] : s.objects) {
    ojson attrs = ojson::object();
    for (const auto& [k, v] : o.attributes) attrs[k] = v;
    objects[name] = ojson{{"location", o.location}, {"attributes", std::move(attrs)}};
  }
  ojson j = ojson::object();
  j["task"] = s.task;
  j["agent_location"] = s.agent_location;
  j["objects"] = std::move(objects);
  j["terminal"] = s.terminal;
  j["completed_goal"] = s.completed_goal;
  return j;
}

inline WorldState state_from_json(const json& j) {
  WorldState s;
  s.task = j.at("task").get<std::string>();
  s.agent_location = j.at("agent_location").get<std::string>();
  for (const auto& [name, o] : j.at("objects").items()) {
    s.objects[name] = {o.at("location").get<std::string>(), bool_map(o.at("attributes"))};
  }
  s.terminal = j.at("terminal").get<bool>();
  s.completed_goal = j.at("completed_goal").get<bool>();
  return s;
}

// Canonical text of a state; equal states have equal keys.
inline std::string state_key(const WorldState& s) { return state_to_json(s).dump(); }

inline std::string encode_state(const WorldState& s) {
  const std::string body = state_key(s);
  return ojson{{"sha256", sha256_hex(body)}, {"state", ojson::parse(body)}}.dump();
}

inline WorldState decode_state(const std::string& blob) {
  try {
    const json j = json::parse(blob);
    const json& state = j.at("state");
    const WorldState s = state_from_json(state);
    if (j.at("sha256").get<std::string>() != sha256_hex(state_key(s))) {
      throw CorruptBlob("checkpoint checksum mismatch");
    }
    return s;
  } catch (const json::exception& e) {
    throw CorruptBlob(std::string("unreadable checkpoint: ") + e.what());
  }
}

inline Checkpoint checkpoint(const WorldState& s, int step_index = 0) { return {step_index, encode_state(s)}; }

inline WorldState restore(const Checkpoint& c) { return decode_state(c.state_blob); }

// ---------------------------------------------------------------------------
// Transitions

struct Transition {
  WorldState state;
  std::string observation;
};

namespace detail {

inline std::string join_names(const std::vector<std::string>& names) {
  if (names.empty()) return "nothing";
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += i + 1 == names.size() ? " and " : ", ";
    out += "a " + names[i];
  }
  return out;
}

inline bool is_closed_container(const WorldState& s, const std::string& place) {
  auto it = s.objects.find(place);
  if (it == s.objects.end()) return false;
  auto open = it->second.attributes.find("Open");
  return open != it->second.attributes.end() && !open->second;
}

inline std::vector<std::string> visible_at(const WorldState& s, const std::string& place) {
  std::vector<std::string> out;
  const bool hidden = is_closed_container(s, place);
  for (const auto& [name, o] : s.objects) {
    if (o.location != place) continue;
    if (hidden && name != place) continue;
    out.push_back(name);
  }
  return out;
}

inline std::string describe(const std::string& name, const ObjectState& o) {
  std::string out = "The " + name + " is ";
  out += o.location == kHeld ? "in your hands" : "at the " + o.location;
  for (const auto& [attr, v] : o.attributes) {
    if (attr == "Open") {
      out += v ? ", open" : ", closed";
    } else {
      out += v ? ", " + attr : ", not " + attr;
    }
  }
  return out + ".";
}

inline bool goal_met(const TaskSpec& task, const WorldState& s) {
  auto it = s.objects.find(task.goal.object);
  if (it == s.objects.end() || it->second.location != task.goal.location) return false;
  for (const auto& [attr, v] : task.goal.attributes) {
    auto a = it->second.attributes.find(attr);
    if (a == it->second.attributes.end() || a->second != v) return false;
  }
  return true;
}

inline bool reachable(const WorldState& s, const std::string& name) {
  const ObjectState& o = s.objects.at(name);
  return o.location == kHeld || o.location == s.agent_location;
}

} // namespace detail

// Pure transition function. Invalid actions leave the state unchanged and
// report an "Error: ..." observation. Repeating an action that already took
// effect is a no-op with a plain observation.
inline Transition step(const TaskSpec& task, const WorldState& state, const std::string& raw_action) {
  Transition out{state, {}};
  WorldState& s = out.state;
  auto fail = [&](const std::string& why) {
    out.state = state;
    out.observation = "Error: " + why;
    return out;
  };
  if (state.terminal) {
    out.observation = "Nothing happens. The episode is over.";
    return out;
  }

  const Action a = parse_action(raw_action);
  std::vector<std::string> args;
  for (int i = 0; a.args.count(std::to_string(i)); ++i) args.push_back(a.args.at(std::to_string(i)));
  if (args.size() != a.args.size()) return fail("unsupported argument syntax in '" + raw_action + "'");
  auto want = [&](std::size_t n) { return args.size() == n; };
  auto arity = [&](std::size_t n) {
    return fail(a.tool + " takes " + std::to_string(n) + (n == 1 ? " argument" : " arguments"));
  };
  auto known_object = [&](const std::string& name) { return s.objects.count(name) > 0; };
  auto known_place = [&](const std::string& p) {
    return std::find(task.places.begin(), task.places.end(), p) != task.places.end();
  };

  if (a.tool == "Look") {
    if (!want(0)) return arity(0);
    out.observation = "You are at the " + s.agent_location + ". You see " +
                      detail::join_names(detail::visible_at(s, s.agent_location)) + ".";
    for (const auto& [name, o] : s.objects) {
      if (o.location == kHeld) out.observation += " You are holding the " + name + ".";
    }
    return out;
  }
  if (a.tool == "GoTo") {
    if (!want(1)) return arity(1);
    const std::string& p = args[0];
    if (!known_place(p)) return fail("there is no place called " + p + ".");
    if (s.agent_location == p) {
      out.observation = "You are already at the " + p + ".";
      return out;
    }
    s.agent_location = p;
    out.observation = "You arrive at the " + p + ". You see " + detail::join_names(detail::visible_at(s, p)) + ".";
    return out;
  }
  if (a.tool == "Examine") {
    if (!want(1)) return arity(1);
    const std::string& name = args[0];
    if (!known_object(name)) return fail("there is no " + name + " here.");
    if (!detail::reachable(s, name)) return fail("the " + name + " is not here.");
    out.observation = detail::describe(name, s.objects.at(name));
    return out;
  }
  if (a.tool == "PickUp") {
    if (!want(1)) return arity(1);
    const std::string& name = args[0];
    if (!known_object(name)) return fail("there is no " + name + " here.");
    ObjectState& o = s.objects.at(name);
    if (o.location == kHeld) {
      out.observation = "You are already holding the " + name + ".";
      return out;
    }
    if (!task.objects.at(name).portable) return fail("the " + name + " cannot be picked up.");
    if (o.location != s.agent_location) return fail("the " + name + " is not here.");
    if (detail::is_closed_container(s, o.location)) return fail("the " + name + " is inside the closed " + o.location + ".");
    for (const auto& [other, os] : s.objects) {
      if (os.location == kHeld) return fail("your hands are full; you are holding the " + other + ".");
    }
    o.location = kHeld;
    out.observation = "You pick up the " + name + ".";
    return out;
  }
  if (a.tool == "Put") {
    if (!want(2)) return arity(2);
    const std::string& name = args[0];
    const std::string& p = args[1];
    if (!known_object(name)) return fail("there is no " + name + " here.");
    if (!known_place(p)) return fail("there is no place called " + p + ".");
    ObjectState& o = s.objects.at(name);
    if (o.location == p) {
      out.observation = "The " + name + " is already in the " + p + ".";
      return out;
    }
    if (o.location != kHeld) return fail("you are not holding the " + name + ".");
    if (s.agent_location != p) return fail("you are not at the " + p + ".");
    if (detail::is_closed_container(s, p)) return fail("the " + p + " is closed.");
    o.location = p;
    out.observation = "You put the " + name + " in the " + p + ".";
    return out;
  }
  if (a.tool == "Open" || a.tool == "Close") {
    if (!want(1)) return arity(1);
    const std::string& name = args[0];
    const bool opening = a.tool == "Open";
    if (!known_object(name)) return fail("there is no " + name + " here.");
    ObjectState& o = s.objects.at(name);
    auto attr = o.attributes.find("Open");
    if (attr == o.attributes.end()) return fail("the " + name + " cannot be opened or closed.");
    if (!detail::reachable(s, name)) return fail("the " + name + " is not here.");
    if (attr->second == opening) {
      out.observation = "The " + name + " is already " + (opening ? "open." : "closed.");
      return out;
    }
    attr->second = opening;
    if (opening) {
      std::vector<std::string> inside;
      for (const auto& [other, os] : s.objects) {
        if (os.location == o.location && other != name) inside.push_back(other);
      }
      out.observation = "You open the " + name + ". Inside you see " + detail::join_names(inside) + ".";
    } else {
      out.observation = "You close the " + name + ".";
    }
    return out;
  }
  if (a.tool == "ToggleObject") {
    if (!want(1)) return arity(1);
    const std::string& name = args[0];
    if (!known_object(name)) return fail("there is no " + name + " here.");
    bool toggleable = false;
    std::vector<std::string> changed;
    for (const ToggleEffect& e : task.toggles) {
      if (e.object != name) continue;
      toggleable = true;
      if (!detail::reachable(s, name)) return fail("the " + name + " is not here.");
      auto target = s.objects.find(e.target);
      if (target == s.objects.end() || target->second.location != e.place) continue;
      bool& value = target->second.attributes[e.attribute];
      if (!value) {
        value = true;
        changed.push_back(e.target + " is now " + e.attribute + " (State Changed: " + e.attribute + ")");
      }
    }
    if (!toggleable) return fail("the " + name + " cannot be toggled.");
    out.observation = "You switch the " + name + " on and then off. ";
    if (changed.empty()) {
      out.observation += "Nothing changes.";
    } else {
      for (std::size_t i = 0; i < changed.size(); ++i) out.observation += (i ? " " : "") + std::string("The ") + changed[i] + ".";
    }
    return out;
  }
  if (a.tool == "Done") {
    if (!want(0)) return arity(0);
    s.terminal = true;
    s.completed_goal = detail::goal_met(task, s);
    out.observation = s.completed_goal ? kCompletedObservation : "You stop. The goal has not been reached.";
    return out;
  }
  return fail("unknown action '" + a.tool + "'.");
}

} // namespace trajaudit::scriptenv
