// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <optional>
#include <regex>
#include <string>

#include "trajaudit/core/jsonl.hpp"
#include "trajaudit/core/report.hpp"

namespace trajaudit::verifier {

// The strict wire form: one JSON object with all three keys.
inline std::string strict_render(const DiagnosticReport& r) {
  ojson o = ojson::object();
  o["verdict"] = std::string(to_string(r.verdict));
  o["error_step"] = r.error_step ? ojson(*r.error_step) : ojson(nullptr);
  o["error_content"] = r.error_content ? ojson(*r.error_content) : ojson(nullptr);
  return o.dump(-1, ' ', false, json::error_handler_t::replace);
}

namespace detail {

inline std::optional<DiagnosticReport> parse_strict_object(const json& j) {
  if (!j.is_object() || !j.contains("verdict") || !j["verdict"].is_string()) return std::nullopt;
  std::string v = j["verdict"].get<std::string>();
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  DiagnosticReport r;
  r.parse_mode = ParseMode::Strict;
  if (v == "normal") return r;
  if (v != "anomaly") return std::nullopt;
  r.verdict = Verdict::Anomaly;
  const json step = j.value("error_step", json());
  if (!step.is_number_integer() || step.get<long long>() < 1) return std::nullopt;
  r.error_step = static_cast<int>(step.get<long long>());
  const json content = j.value("error_content", json());
  if (content.is_string()) {
    r.error_content = content.get<std::string>();
  } else if (!content.is_null()) {
    return std::nullopt;
  }
  return r;
}

inline std::optional<DiagnosticReport> parse_strict(const std::string& raw) {
  auto attempt = [](const std::string& text) -> std::optional<DiagnosticReport> {
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return parse_strict_object(j);
  };
  if (auto r = attempt(raw)) return r;
  // Allow prose or a code fence around the object.
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  return attempt(raw.substr(open, close - open + 1));
}

inline std::size_t sentence_end(const std::string& s, std::size_t from) {
  for (std::size_t i = from; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\n') return i;
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1])))) {
      return i + 1;
    }
  }
  return s.size();
}

inline std::string trim_content(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n:;,-");
  if (b == std::string::npos) return "";
  s = s.substr(b);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

} // namespace detail

// Total parser: strict JSON object first, then a keyword scan, otherwise a
// Failed parse that reads as Normal.
inline DiagnosticReport parse_report(const std::string& raw) {
  if (auto strict = detail::parse_strict(raw)) {
    strict->raw_output = raw;
    return *strict;
  }

  DiagnosticReport failed = DiagnosticReport::normal(ParseMode::Failed);
  failed.raw_output = raw;

  static const std::regex anomaly_word(R"(\b(anomal\w*|abnormal)\b)", std::regex::icase);
  static const std::regex normal_word(R"(\bnormal\b)", std::regex::icase);
  static const std::regex step_pattern(R"(\bstep\s*#?\s*(\d+))", std::regex::icase);
  std::smatch am, nm;
  const bool has_anomaly = std::regex_search(raw, am, anomaly_word);
  const bool has_normal = std::regex_search(raw, nm, normal_word);
  if (!has_anomaly && !has_normal) return failed;

  if (!has_anomaly || (has_normal && nm.position(0) < am.position(0))) {
    DiagnosticReport r = DiagnosticReport::normal(ParseMode::Lenient);
    r.raw_output = raw;
    return r;
  }

  std::smatch sm;
  if (!std::regex_search(raw, sm, step_pattern)) return failed;
  const std::string digits = sm.str(1);
  if (digits.size() > 9) return failed;
  const int step = std::stoi(digits);
  if (step < 1) return failed;

  const auto after = static_cast<std::size_t>(sm.position(0) + sm.length(0));
  std::size_t end = detail::sentence_end(raw, after);
  std::string content = detail::trim_content(raw.substr(after, end - after));
  if (content.empty() || content == "." || content == "!" || content == "?") {
    std::size_t start = end;
    while (start < raw.size() && std::isspace(static_cast<unsigned char>(raw[start]))) ++start;
    content = detail::trim_content(raw.substr(start, detail::sentence_end(raw, start) - start));
  }
  DiagnosticReport r = DiagnosticReport::anomaly(step, content, ParseMode::Lenient);
  if (content.empty()) r.error_content.reset();
  r.raw_output = raw;
  return r;
}

} // namespace trajaudit::verifier
