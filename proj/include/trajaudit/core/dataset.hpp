// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "trajaudit/core/digest.hpp"
#include "trajaudit/core/jsonl.hpp"
#include "trajaudit/core/types.hpp"

namespace trajaudit {

struct Manifest {
  std::size_t total = 0;
  std::map<std::string, std::size_t> by_domain;
  std::map<std::string, std::size_t> by_task;
  std::map<std::string, std::size_t> by_verdict;
  std::map<std::string, std::size_t> by_anomaly_type;
  // Labeling conventions carried alongside the counts (not recounted).
  std::map<std::string, std::string> conventions;

  void count(const LabeledTrajectory& item) {
    ++total;
    ++by_domain[std::string(to_string(item.trajectory.domain))];
    ++by_task[item.trajectory.task];
    ++by_verdict[std::string(to_string(item.label.verdict))];
    if (item.label.anomaly_type) ++by_anomaly_type[std::string(to_string(*item.label.anomaly_type))];
  }

  bool same_counts(const Manifest& o) const {
    return total == o.total && by_domain == o.by_domain && by_task == o.by_task && by_verdict == o.by_verdict &&
           by_anomaly_type == o.by_anomaly_type;
  }

  std::size_t verdict_count(Verdict v) const {
    auto it = by_verdict.find(std::string(to_string(v)));
    return it == by_verdict.end() ? 0 : it->second;
  }

  ojson to_json() const {
    auto counts = [](const std::map<std::string, std::size_t>& m) {
      ojson o = ojson::object();
      for (const auto& [k, v] : m) o[k] = v;
      return o;
    };
    ojson o = ojson::object();
    o["total"] = total;
    o["by_domain"] = counts(by_domain);
    o["by_task"] = counts(by_task);
    o["by_verdict"] = counts(by_verdict);
    o["by_anomaly_type"] = counts(by_anomaly_type);
    ojson conv = ojson::object();
    for (const auto& [k, v] : conventions) conv[k] = v;
    o["conventions"] = std::move(conv);
    return o;
  }

  std::string digest() const { return sha256_hex(to_json().dump()); }
};

// Ordered collection of labeled trajectories with unique ids and a manifest
// that is kept in step with every mutation.
class Dataset {
public:
  Dataset() = default;

  explicit Dataset(std::vector<LabeledTrajectory> items) {
    for (auto& item : items) add(std::move(item));
  }

  void add(LabeledTrajectory item) {
    validate(item);
    if (!ids_.insert(item.trajectory.id).second) {
      throw DatasetError("duplicate id '" + item.trajectory.id + "'");
    }
    manifest_.count(item);
    items_.push_back(std::move(item));
  }

  const std::vector<LabeledTrajectory>& items() const noexcept { return items_; }
  const Manifest& manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  bool contains(const std::string& id) const { return ids_.count(id) != 0; }

  void set_convention(const std::string& key, const std::string& value) { manifest_.conventions[key] = value; }

  Manifest recount() const {
    Manifest m;
    for (const auto& item : items_) m.count(item);
    m.conventions = manifest_.conventions;
    return m;
  }

  const LabeledTrajectory* find(const std::string& id) const {
    for (const auto& item : items_) {
      if (item.trajectory.id == id) return &item;
    }
    return nullptr;
  }

private:
  std::vector<LabeledTrajectory> items_;
  std::set<std::string> ids_;
  Manifest manifest_;
};

inline Dataset load_dataset(const std::string& path) { return Dataset(read_labeled_jsonl(path)); }

inline void save_dataset(const std::string& path, const Dataset& ds) { write_labeled_jsonl(path, ds.items()); }

} // namespace trajaudit
