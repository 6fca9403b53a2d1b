// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajaudit/core/jsonl.hpp"
#include "trajaudit/core/types.hpp"

namespace trajaudit {

enum class ParseMode { Strict, Lenient, Failed };

inline std::string_view to_string(ParseMode m) {
  switch (m) {
  case ParseMode::Strict: return "strict";
  case ParseMode::Lenient: return "lenient";
  case ParseMode::Failed: return "failed";
  }
  return "?";
}

// A verifier's output: verdict, localized first error step, predicted error
// content, plus the raw text it was parsed from.
struct DiagnosticReport {
  Verdict verdict = Verdict::Normal;
  std::optional<int> error_step;
  std::optional<std::string> error_content;
  std::string raw_output;
  ParseMode parse_mode = ParseMode::Strict;

  static DiagnosticReport normal(ParseMode mode = ParseMode::Strict) {
    DiagnosticReport r;
    r.parse_mode = mode;
    return r;
  }

  static DiagnosticReport anomaly(int step, std::string content, ParseMode mode = ParseMode::Strict) {
    DiagnosticReport r;
    r.verdict = Verdict::Anomaly;
    r.error_step = step;
    r.error_content = std::move(content);
    r.parse_mode = mode;
    return r;
  }

  // Verdict, step and content only; raw text and parse mode are provenance.
  bool same_diagnosis(const DiagnosticReport& o) const {
    return verdict == o.verdict && error_step == o.error_step && error_content == o.error_content;
  }
};

using PredictionMap = std::map<std::string, DiagnosticReport>;

// Predictions JSONL: {"id","verdict","error_step"?,"error_content"?}
inline std::string serialize_prediction(const std::string& id, const DiagnosticReport& r) {
  ojson o = ojson::object();
  o["id"] = id;
  o["verdict"] = std::string(to_string(r.verdict));
  if (r.error_step) o["error_step"] = *r.error_step;
  if (r.error_content) o["error_content"] = *r.error_content;
  return o.dump(-1, ' ', false, ojson::error_handler_t::replace);
}

inline std::pair<std::string, DiagnosticReport> parse_prediction_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("prediction: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("prediction: expected object");
  std::string id = "<unknown>";
  if (auto it = j.find("id"); it != j.end() && it->is_string()) id = it->get<std::string>();
  detail::FieldReader r(j, "", id);
  DiagnosticReport rep;
  id = r.string("id");
  const std::string verdict = r.string("verdict");
  const auto v = verdict_from_string(verdict);
  if (!v) r.fail("verdict", "expected \"normal\" or \"anomaly\"");
  rep.verdict = *v;
  if (r.has("error_step")) rep.error_step = r.integer("error_step");
  rep.error_content = r.optional_string("error_content");
  rep.raw_output = line;
  return {id, rep};
}

inline PredictionMap read_predictions(const std::string& path) {
  PredictionMap out;
  for (const std::string& line : read_lines(path)) {
    auto [id, rep] = parse_prediction_line(line);
    out[id] = std::move(rep);
  }
  return out;
}

inline void write_predictions(const std::string& path, const std::vector<std::pair<std::string, DiagnosticReport>>& preds) {
  std::string buf;
  for (const auto& [id, rep] : preds) {
    buf += serialize_prediction(id, rep);
    buf += '\n';
  }
  write_text_file(path, buf);
}

} // namespace trajaudit
