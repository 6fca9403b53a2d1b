// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trajaudit/core/dataset.hpp"
#include "trajaudit/core/rng.hpp"

namespace trajaudit::synth {

struct Split {
  Dataset train;
  Dataset test;
};

// Key that keeps a golden and the anomalies derived from it together.
inline std::string pair_key(const LabeledTrajectory& item) {
  return item.label.source_id.value_or(item.trajectory.id);
}

// Per task, round(test_fraction * units) units go to test, where a unit is a
// golden plus every anomaly whose source_id names it. Items keep their
// original relative order in both partitions.
inline Split stratified_split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test fraction must lie strictly between 0 and 1");
  }
  std::map<std::string, std::vector<std::string>> units_by_task;
  std::map<std::string, std::string> task_of_unit;
  for (const auto& item : dataset.items()) {
    const std::string key = pair_key(item);
    if (task_of_unit.emplace(key, item.trajectory.task).second) units_by_task[item.trajectory.task].push_back(key);
  }

  std::set<std::string> test_units;
  for (auto& [task, units] : units_by_task) {
    const auto k = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(units.size())));
    Rng rng = derive_rng(seed, "split:" + task);
    std::vector<std::string> order = units;
    shuffle(order, rng);
    test_units.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }

  Split out;
  for (const auto& item : dataset.items()) {
    (test_units.count(pair_key(item)) ? out.test : out.train).add(item);
  }
  for (const auto& [k, v] : dataset.manifest().conventions) {
    out.train.set_convention(k, v);
    out.test.set_convention(k, v);
  }
  return out;
}

} // namespace trajaudit::synth
