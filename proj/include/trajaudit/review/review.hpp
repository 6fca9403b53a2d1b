// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "trajaudit/core/dataset.hpp"
#include "trajaudit/core/digest.hpp"
#include "trajaudit/core/ratio.hpp"
#include "trajaudit/core/rng.hpp"

namespace trajaudit::review {

struct ReviewSet {
  std::string id;
  std::vector<std::string> sample_ids;
  int per_domain_quota = 0;
  std::string created_from;  // dataset manifest digest
  std::uint64_t seed = 0;
};

struct HumanVerdict {
  std::string set_id;
  std::string sample_id;
  std::string annotator_id;
  bool category_agrees = false;
  // Empty when not applicable: Normal ground truth, or the annotator did not
  // assess localization.
  std::optional<bool> localization_agrees;
  std::optional<std::string> comment;
  std::string timestamp;
};

struct AgreementStats {
  Ratio classification;
  Ratio localization;
  std::size_t verdicts = 0;
};

inline ojson set_to_json(const ReviewSet& s) {
  ojson o = ojson::object();
  o["id"] = s.id;
  o["sample_ids"] = s.sample_ids;
  o["per_domain_quota"] = s.per_domain_quota;
  o["created_from"] = s.created_from;
  o["seed"] = s.seed;
  return o;
}

inline ReviewSet set_from_json(const json& j) {
  return {j.at("id").get<std::string>(), j.at("sample_ids").get<std::vector<std::string>>(),
          j.at("per_domain_quota").get<int>(), j.at("created_from").get<std::string>(), j.at("seed").get<std::uint64_t>()};
}

inline ojson verdict_to_json(const HumanVerdict& v) {
  ojson o = ojson::object();
  o["set_id"] = v.set_id;
  o["sample_id"] = v.sample_id;
  o["annotator_id"] = v.annotator_id;
  o["category_agrees"] = v.category_agrees;
  o["localization_agrees"] = v.localization_agrees ? ojson(*v.localization_agrees) : ojson(nullptr);
  o["comment"] = v.comment ? ojson(*v.comment) : ojson(nullptr);
  o["timestamp"] = v.timestamp;
  return o;
}

// Strict on field types; unknown fields are rejected.
inline HumanVerdict verdict_from_json(const json& j) {
  static const std::set<std::string> known = {"set_id",   "sample_id", "annotator_id", "category_agrees",
                                              "localization_agrees", "comment", "timestamp"};
  if (!j.is_object()) throw SchemaError("verdict must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw SchemaError("unknown verdict field '" + k + "'");
  }
  auto text = [&](const char* k) {
    if (!j.contains(k) || !j[k].is_string() || j[k].get<std::string>().empty()) {
      throw SchemaError(std::string("verdict field '") + k + "' must be a non-empty string");
    }
    return j[k].get<std::string>();
  };
  HumanVerdict v;
  v.set_id = text("set_id");
  v.sample_id = text("sample_id");
  v.annotator_id = text("annotator_id");
  if (!j.contains("category_agrees") || !j["category_agrees"].is_boolean()) {
    throw SchemaError("verdict field 'category_agrees' must be a boolean");
  }
  v.category_agrees = j["category_agrees"].get<bool>();
  const json loc = j.value("localization_agrees", json());
  if (loc.is_boolean()) {
    v.localization_agrees = loc.get<bool>();
  } else if (!loc.is_null()) {
    throw SchemaError("verdict field 'localization_agrees' must be a boolean or null");
  }
  const json comment = j.value("comment", json());
  if (comment.is_string()) {
    v.comment = comment.get<std::string>();
  } else if (!comment.is_null()) {
    throw SchemaError("verdict field 'comment' must be a string or null");
  }
  v.timestamp = j.value("timestamp", std::string());
  return v;
}

inline ojson stats_to_json(const AgreementStats& s) {
  ojson o = ojson::object();
  o["verdicts"] = s.verdicts;
  o["classification"] = {{"numerator", s.classification.num},
                         {"denominator", s.classification.den},
                         {"rate", s.classification.value()},
                         {"rate_pct", s.classification.percent()}};
  o["localization"] = {{"numerator", s.localization.num},
                       {"denominator", s.localization.den},
                       {"rate", s.localization.value()},
                       {"rate_pct", s.localization.percent()}};
  return o;
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// per_domain anomalous samples from every domain, uniform without
// replacement. The set id is a digest of (dataset, seed, quota).
inline ReviewSet stratified_sample(const Dataset& ds, int per_domain, std::uint64_t seed) {
  if (per_domain < 0) throw InvariantError("per_domain must be >= 0");
  ReviewSet set;
  set.per_domain_quota = per_domain;
  set.created_from = ds.manifest().digest();
  set.seed = seed;
  set.id = "rs-" + sha256_hex(set.created_from + ":" + std::to_string(seed) + ":" + std::to_string(per_domain)).substr(0, 12);
  if (per_domain == 0) return set;
  for (Domain d : kAllDomains) {
    std::vector<std::string> pool;
    for (const auto& item : ds.items()) {
      if (item.trajectory.domain == d && item.label.verdict == Verdict::Anomaly) pool.push_back(item.trajectory.id);
    }
    if (static_cast<int>(pool.size()) < per_domain) {
      throw InsufficientSamples("domain " + std::string(to_string(d)) + " has " + std::to_string(pool.size()) +
                                " anomalous samples, " + std::to_string(per_domain) + " requested");
    }
    Rng rng = derive_rng(seed, "review:" + std::string(to_string(d)));
    shuffle(pool, rng);
    set.sample_ids.insert(set.sample_ids.end(), pool.begin(), pool.begin() + per_domain);
  }
  return set;
}

// Review sets and verdicts over one dataset. With a log path, every accepted
// set and verdict is appended as one JSON line and replayed on construction.
class ReviewStore {
public:
  explicit ReviewStore(Dataset dataset, std::string log_path = {})
      : dataset_(std::move(dataset)), log_path_(std::move(log_path)) {
    for (const auto& item : dataset_.items()) by_id_[item.trajectory.id] = &item;
    if (!log_path_.empty()) replay_log();
  }

  ReviewStore(const ReviewStore&) = delete;
  ReviewStore& operator=(const ReviewStore&) = delete;

  const Dataset& dataset() const { return dataset_; }

  ReviewSet create_set(int per_domain, std::uint64_t seed) {
    ReviewSet s = stratified_sample(dataset_, per_domain, seed);
    std::unique_lock lock(mutex_);
    if (!sets_.count(s.id)) {
      append({{"type", "set"}, {"set", set_to_json(s)}});
      apply_set(s);
    }
    return sets_.at(s.id);
  }

  ReviewSet get_set(const std::string& id) const {
    std::shared_lock lock(mutex_);
    return set_locked(id);
  }

  std::vector<std::string> set_ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sets_) out.push_back(id);
    return out;
  }

  const LabeledTrajectory& sample(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw UnknownSample("no sample '" + id + "'");
    return *it->second;
  }

  // Returns the stored verdict (with the localization field normalized).
  HumanVerdict record_verdict(HumanVerdict v) {
    std::unique_lock lock(mutex_);
    const ReviewSet& set = set_locked(v.set_id);
    if (!members_.at(set.id).count(v.sample_id)) {
      throw UnknownSample("sample '" + v.sample_id + "' is not in review set " + set.id);
    }
    if (seen_.count({v.sample_id, v.annotator_id})) {
      throw DuplicateVerdict("annotator '" + v.annotator_id + "' already reviewed '" + v.sample_id + "'");
    }
    if (sample(v.sample_id).label.verdict == Verdict::Normal) v.localization_agrees.reset();
    if (v.timestamp.empty()) v.timestamp = utc_now();
    append({{"type", "verdict"}, {"verdict", verdict_to_json(v)}});
    apply_verdict(v);
    return v;
  }

  std::vector<HumanVerdict> verdicts(const std::string& set_id) const {
    std::shared_lock lock(mutex_);
    set_locked(set_id);
    std::vector<HumanVerdict> out;
    for (const auto& v : log_) {
      if (v.set_id == set_id) out.push_back(v);
    }
    return out;
  }

  // Next sample in set order this annotator has not reviewed yet.
  std::optional<std::string> next_sample(const std::string& set_id, const std::string& annotator) const {
    std::shared_lock lock(mutex_);
    for (const std::string& id : set_locked(set_id).sample_ids) {
      if (!seen_.count({id, annotator})) return id;
    }
    return std::nullopt;
  }

  AgreementStats stats(const std::string& set_id) const {
    const std::vector<HumanVerdict> vs = verdicts(set_id);
    if (vs.empty()) throw EmptySet("review set " + set_id + " has no verdicts");
    AgreementStats s;
    s.verdicts = vs.size();
    for (const HumanVerdict& v : vs) {
      ++s.classification.den;
      if (v.category_agrees) ++s.classification.num;
      if (v.localization_agrees) {
        ++s.localization.den;
        if (*v.localization_agrees) ++s.localization.num;
      }
    }
    return s;
  }

private:
  const ReviewSet& set_locked(const std::string& id) const {
    auto it = sets_.find(id);
    if (it == sets_.end()) throw UnknownReviewSet("no review set '" + id + "'");
    return it->second;
  }

  void apply_set(const ReviewSet& s) {
    for (const std::string& id : s.sample_ids) {
      if (!by_id_.count(id)) throw UnknownSample("review set " + s.id + " names unknown sample '" + id + "'");
    }
    sets_[s.id] = s;
    members_[s.id] = {s.sample_ids.begin(), s.sample_ids.end()};
  }

  void apply_verdict(const HumanVerdict& v) {
    seen_.insert({v.sample_id, v.annotator_id});
    log_.push_back(v);
  }

  void append(const ojson& record) {
    if (log_path_.empty()) return;
    std::ofstream out(log_path_, std::ios::app | std::ios::binary);
    out << record.dump(-1, ' ', false, json::error_handler_t::replace) << "\n";
    out.flush();
    if (!out) throw Error("IoError", "cannot append to verdict log " + log_path_);
  }

  void replay_log() {
    std::ifstream probe(log_path_);
    if (!probe) return;
    std::size_t lineno = 0;
    for (const std::string& line : read_lines(log_path_)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        const std::string type = j.at("type").get<std::string>();
        if (type == "set") {
          apply_set(set_from_json(j.at("set")));
        } else if (type == "verdict") {
          apply_verdict(verdict_from_json(j.at("verdict")));
        } else {
          throw SchemaError("unknown record type '" + type + "'");
        }
      } catch (const json::exception& e) {
        throw SchemaError(log_path_ + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  Dataset dataset_;
  std::string log_path_;
  std::map<std::string, const LabeledTrajectory*> by_id_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, ReviewSet> sets_;
  std::map<std::string, std::set<std::string>> members_;
  std::set<std::pair<std::string, std::string>> seen_;
  std::vector<HumanVerdict> log_;
};

} // namespace trajaudit::review
