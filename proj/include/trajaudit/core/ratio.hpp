// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace trajaudit {

// Exact rational rate. A zero denominator reads as 0.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

  // Percentage with one decimal, rounded half-up on the exact fraction:
  // 34436/37625 -> "91.5%".
  std::string percent() const {
    if (den == 0) return "0.0%";
    const std::uint64_t tenths = (num * 2000 + den) / (2 * den);
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10) + "%";
  }

  bool operator==(const Ratio&) const = default;
};

} // namespace trajaudit
