// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trajaudit/core/jsonl.hpp"

namespace trajaudit::cli {

// Bad invocation: unknown key, malformed value, missing parameter. Exit code 2.
class UsageError : public Error {
public:
  explicit UsageError(const std::string& message) : Error("UsageError", message) {}
};

// Every key a config file or flag may set, with its default ("" = unset).
inline const std::map<std::string, std::string>& config_defaults() {
  static const std::map<std::string, std::string> d = {
      {"seeds", ""},
      {"dataset", ""},
      {"anomalies", ""},
      {"predictions", ""},
      {"metrics", ""},
      {"out", "trajaudit-out"},
      {"seed", "0"},
      {"tau", "0.2"},
      {"interval", "1"},
      {"retry_budget", "3"},
      {"max_steps", "200"},
      {"test_fraction", "0.1"},
      {"generator", "scripted"},
      {"verifier", "rule"},
      {"validator_marker", ""},
      {"band_lower_fraction", "0.3"},
      {"band_min_step", "2"},
      {"anomaly_mix", "even"},
      {"refusal_phrases", ""},
      {"tasks", ""},
      {"task", "clean-plate"},
      {"inject_type", ""},
      {"inject_step", "0"},
      {"template", ""},
      {"recording", ""},
      {"base_url", ""},
      {"model", ""},
      {"token_env", "TRAJAUDIT_GATEWAY_TOKEN"},
      {"max_retries", "3"},
      {"backoff_ms", "500"},
      {"timeout_ms", "30000"},
      {"concurrency", "4"},
      {"per_domain", "100"},
      {"host", "127.0.0.1"},
      {"port", "8787"},
      {"log", ""},
      {"review_token_env", "TRAJAUDIT_REVIEW_TOKEN"},
  };
  return d;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Resolved configuration: defaults, then the config file, then flags.
class CliConfig {
public:
  CliConfig() : values_(config_defaults()) {}

  // "key = value" lines; '#' starts a comment line. Dashes in keys read as
  // underscores, so flag names can be pasted in.
  void merge_file_text(const std::string& text, const std::string& origin = "config") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      }
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), origin + ":" + std::to_string(lineno));
    }
  }

  void merge_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    merge_file_text(buf.str(), path);
  }

  void set(std::string key, std::string value, const std::string& origin = "flag") {
    for (char& c : key) {
      if (c == '-') c = '_';
    }
    if (!values_.count(key)) throw UsageError(origin + ": unknown config key '" + key + "'");
    values_[key] = std::move(value);
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }

  const std::string& required(const std::string& key) const {
    const std::string& v = str(key);
    if (v.empty()) throw UsageError("missing required parameter '" + key + "'");
    return v;
  }

  long long integer(const std::string& key) const {
    const std::string& v = str(key);
    long long out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw UsageError(key + ": expected an integer, got '" + v + "'");
    return out;
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const std::string& v = str(key);
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
  }

  double real(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw UsageError(key + ": expected a number, got '" + v + "'");
    }
  }

  std::string choice(const std::string& key, const std::set<std::string>& allowed) const {
    const std::string& v = str(key);
    if (!allowed.count(v)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
      throw UsageError(key + ": expected one of {" + list + "}, got '" + v + "'");
    }
    return v;
  }

  ojson to_json() const {
    ojson o = ojson::object();
    for (const auto& [k, v] : values_) o[k] = v;
    return o;
  }

private:
  std::map<std::string, std::string> values_;
};

// Trajectory JSONL where a label is optional (seed files).
inline std::vector<Trajectory> read_trajectories_jsonl(const std::string& path) {
  std::vector<Trajectory> out;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    try {
      const json j = json::parse(line);
      Trajectory t = trajectory_from_json(j);
      validate(t);
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

} // namespace trajaudit::cli
