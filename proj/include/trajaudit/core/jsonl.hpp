// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trajaudit/core/errors.hpp"
#include "trajaudit/core/types.hpp"

namespace trajaudit {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace detail {

class FieldReader {
public:
  FieldReader(const json& obj, std::string path, std::string record_id)
      : obj_(obj), path_(std::move(path)), record_id_(std::move(record_id)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw SchemaError(qualified(field) + ": " + what + " (record '" + record_id_ + "')");
  }

  std::string qualified(const std::string& field) const { return path_.empty() ? field : path_ + "." + field; }

  bool has(const char* key) const {
    auto it = obj_.find(key);
    return it != obj_.end() && !it->is_null();
  }

  const json& required(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) fail(key, "missing field");
    return *it;
  }

  std::string string(const char* key) const {
    const json& v = required(key);
    if (!v.is_string()) fail(key, "expected string");
    return v.get<std::string>();
  }

  std::optional<std::string> optional_string(const char* key) const {
    if (!has(key)) return std::nullopt;
    return string(key);
  }

  int integer(const char* key) const {
    const json& v = required(key);
    if (!v.is_number_integer()) fail(key, "expected integer");
    return v.get<int>();
  }

  const json& array(const char* key) const {
    const json& v = required(key);
    if (!v.is_array()) fail(key, "expected array");
    return v;
  }

  const json& object(const char* key) const {
    const json& v = required(key);
    if (!v.is_object()) fail(key, "expected object");
    return v;
  }

  TextMap text_map(const char* key) const {
    TextMap out;
    if (!has(key)) return out;
    const json& v = object(key);
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (!it.value().is_string()) fail(std::string(key) + "." + it.key(), "expected string");
      out[it.key()] = it.value().get<std::string>();
    }
    return out;
  }

private:
  const json& obj_;
  std::string path_;
  std::string record_id_;
};

inline ojson text_map_json(const TextMap& m) {
  ojson o = ojson::object();
  for (const auto& [k, v] : m) o[k] = v;
  return o;
}

} // namespace detail

inline ojson action_to_json(const Action& a) {
  ojson o = ojson::object();
  o["tool"] = a.tool;
  o["args"] = detail::text_map_json(a.args);
  o["raw"] = a.raw;
  return o;
}

inline ojson step_to_json(const Step& s) {
  ojson o = ojson::object();
  o["index"] = s.index;
  o["thought"] = s.thought;
  o["action"] = action_to_json(s.action);
  o["observation"] = s.observation;
  return o;
}

inline ojson label_to_json(const AnomalyLabel& l) {
  ojson o = ojson::object();
  o["verdict"] = std::string(to_string(l.verdict));
  if (l.anomaly_type) o["anomaly_type"] = std::string(to_string(*l.anomaly_type));
  if (l.first_error_step) o["first_error_step"] = *l.first_error_step;
  if (l.error_content) o["error_content"] = *l.error_content;
  if (l.source_id) o["source_id"] = *l.source_id;
  return o;
}

inline ojson trajectory_fields_json(const Trajectory& t) {
  ojson o = ojson::object();
  o["id"] = t.id;
  o["domain"] = std::string(to_string(t.domain));
  o["task"] = t.task;
  o["instruction"] = t.instruction;
  ojson tools = ojson::array();
  for (const ToolDescriptor& d : t.available_tools) {
    ojson td = ojson::object();
    td["name"] = d.name;
    td["signature"] = d.signature;
    tools.push_back(std::move(td));
  }
  o["tools"] = std::move(tools);
  ojson steps = ojson::array();
  for (const Step& s : t.steps) steps.push_back(step_to_json(s));
  o["steps"] = std::move(steps);
  return o;
}

inline ojson labeled_to_json(const LabeledTrajectory& item) {
  ojson o = trajectory_fields_json(item.trajectory);
  o["label"] = label_to_json(item.label);
  o["metadata"] = detail::text_map_json(item.trajectory.metadata);
  return o;
}

// One JSONL record, keys in canonical order, UTF-8 without escaping, no
// trailing newline.
inline std::string serialize_trajectory(const LabeledTrajectory& item) {
  return labeled_to_json(item).dump(-1, ' ', false, ojson::error_handler_t::strict);
}

inline Action action_from_json(const json& j, const detail::FieldReader& parent, const std::string& path,
                               const std::string& id) {
  if (!j.is_object()) parent.fail(path, "expected object");
  detail::FieldReader r(j, parent.qualified(path), id);
  Action a;
  a.tool = r.has("tool") ? r.string("tool") : std::string();
  a.args = r.text_map("args");
  a.raw = r.string("raw");
  return a;
}

inline Trajectory trajectory_from_json(const json& j, std::string_view path = {}) {
  if (!j.is_object()) throw SchemaError("record: expected JSON object");
  std::string id = "<unknown>";
  if (auto it = j.find("id"); it != j.end() && it->is_string()) id = it->get<std::string>();
  detail::FieldReader r(j, std::string(path), id);

  Trajectory t;
  t.id = r.string("id");
  const std::string domain = r.string("domain");
  const auto d = domain_from_string(domain);
  if (!d) r.fail("domain", "unknown domain '" + domain + "'");
  t.domain = *d;
  t.task = r.string("task");
  t.instruction = r.string("instruction");

  const json& tools = r.array("tools");
  for (std::size_t i = 0; i < tools.size(); ++i) {
    const std::string field = "tools[" + std::to_string(i) + "]";
    if (!tools[i].is_object()) r.fail(field, "expected object");
    detail::FieldReader tr(tools[i], r.qualified(field), id);
    t.available_tools.push_back({tr.string("name"), tr.string("signature")});
  }

  const json& steps = r.array("steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string field = "steps[" + std::to_string(i) + "]";
    if (!steps[i].is_object()) r.fail(field, "expected object");
    detail::FieldReader sr(steps[i], r.qualified(field), id);
    Step s;
    s.index = sr.integer("index");
    s.thought = sr.string("thought");
    s.action = action_from_json(sr.required("action"), sr, "action", id);
    s.observation = sr.string("observation");
    t.steps.push_back(std::move(s));
  }
  t.metadata = r.text_map("metadata");
  return t;
}

inline AnomalyLabel label_from_json(const json& j, const std::string& id) {
  if (!j.is_object()) throw SchemaError("label: expected object (record '" + id + "')");
  detail::FieldReader r(j, "label", id);
  AnomalyLabel l;
  const std::string verdict = r.string("verdict");
  const auto v = verdict_from_string(verdict);
  if (!v) r.fail("verdict", "expected \"normal\" or \"anomaly\", got '" + verdict + "'");
  l.verdict = *v;
  if (r.has("anomaly_type")) {
    const std::string type = r.string("anomaly_type");
    const auto at = anomaly_type_from_string(type);
    if (!at) r.fail("anomaly_type", "unknown anomaly type '" + type + "'");
    l.anomaly_type = *at;
  }
  if (r.has("first_error_step")) l.first_error_step = r.integer("first_error_step");
  l.error_content = r.optional_string("error_content");
  l.source_id = r.optional_string("source_id");
  return l;
}

inline LabeledTrajectory labeled_from_json(const json& j) {
  LabeledTrajectory item;
  item.trajectory = trajectory_from_json(j);
  const auto it = j.find("label");
  if (it == j.end() || it->is_null()) {
    throw SchemaError("label: missing field (record '" + item.trajectory.id + "')");
  }
  item.label = label_from_json(*it, item.trajectory.id);
  validate(item);
  return item;
}

inline LabeledTrajectory parse_trajectory_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("record: malformed JSON: ") + e.what());
  }
  return labeled_from_json(j);
}

// ---------------------------------------------------------------------------
// Files

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

inline std::vector<LabeledTrajectory> read_labeled_jsonl(const std::string& path) {
  std::vector<LabeledTrajectory> out;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    try {
      out.push_back(parse_trajectory_line(line));
    } catch (const Error& e) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("IoError", "cannot write '" + path + "'");
  out << content;
}

inline void write_labeled_jsonl(const std::string& path, const std::vector<LabeledTrajectory>& items) {
  std::string buf;
  for (const LabeledTrajectory& item : items) {
    buf += serialize_trajectory(item);
    buf += '\n';
  }
  write_text_file(path, buf);
}

} // namespace trajaudit
