// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trajaudit/core/digest.hpp"

namespace trajaudit {

// mt19937_64 output is fixed by the standard; the distributions are not, so
// bounded draws and shuffles below are done by hand to keep results identical
// across standard libraries.
using Rng = std::mt19937_64;

inline Rng derive_rng(std::uint64_t root_seed, std::string_view key) {
  return Rng(sha256_u64(std::to_string(root_seed) + ":" + std::string(key)));
}

// Uniform integer in [lo, hi] by rejection sampling.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(rng());
  const std::uint64_t limit = Rng::max() - (Rng::max() % span);
  std::uint64_t draw = 0;
  do {
    draw = rng();
  } while (draw >= limit);
  return lo + static_cast<std::int64_t>(draw % span);
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

} // namespace trajaudit
