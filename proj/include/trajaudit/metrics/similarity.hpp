// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace trajaudit::metrics {

struct MatchingBlock {
  std::size_t a_start = 0;
  std::size_t b_start = 0;
  std::size_t length = 0;

  bool operator==(const MatchingBlock&) const = default;
};

struct SimilarityOptions {
  // Lowercase ASCII letters and collapse whitespace runs before comparing.
  bool normalize = false;
};

// Decodes UTF-8 into code points so that similarity is measured over
// characters, not bytes. Malformed bytes are kept as single units.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t cp = c;
    if (c >= 0xF0 && c < 0xF8) {
      len = 4;
      cp = c & 0x07;
    } else if (c >= 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if (c >= 0xC0) {
      len = 2;
      cp = c & 0x1F;
    }
    if (len > 1 && i + static_cast<std::size_t>(len) <= s.size()) {
      bool ok = true;
      for (int k = 1; k < len; ++k) {
        const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((cc & 0xC0) != 0x80) {
          ok = false;
          break;
        }
        cp = (cp << 6) | (cc & 0x3F);
      }
      if (ok) {
        out.push_back(cp);
        i += static_cast<std::size_t>(len);
        continue;
      }
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

inline std::string normalize_text(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
  }
  return out;
}

namespace detail {

// Longest common contiguous block of a[alo,ahi) and b[blo,bhi). Among blocks
// of maximal length the one starting earliest in a wins, then earliest in b.
template <typename Seq>
MatchingBlock longest_match(const Seq& a, std::size_t alo, std::size_t ahi, const Seq& b, std::size_t blo,
                            std::size_t bhi, std::vector<std::size_t>& prev, std::vector<std::size_t>& cur) {
  MatchingBlock best{alo, blo, 0};
  const std::size_t width = bhi - blo;
  prev.assign(width + 1, 0);
  cur.assign(width + 1, 0);
  for (std::size_t i = alo; i < ahi; ++i) {
    cur[0] = 0;
    for (std::size_t j = blo; j < bhi; ++j) {
      const std::size_t col = j - blo + 1;
      if (a[i] == b[j]) {
        const std::size_t k = prev[col - 1] + 1;
        cur[col] = k;
        if (k > best.length) best = {i + 1 - k, j + 1 - k, k};
      } else {
        cur[col] = 0;
      }
    }
    std::swap(prev, cur);
  }
  return best;
}

} // namespace detail

// Recursive longest-match decomposition, blocks ordered by position. No junk
// filtering of any kind.
template <typename Seq>
std::vector<MatchingBlock> matching_blocks(const Seq& a, const Seq& b) {
  std::vector<MatchingBlock> blocks;
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> pending;
  pending.emplace_back(0, a.size(), 0, b.size());
  std::vector<std::size_t> prev;
  std::vector<std::size_t> cur;
  while (!pending.empty()) {
    const auto [alo, ahi, blo, bhi] = pending.back();
    pending.pop_back();
    if (alo >= ahi || blo >= bhi) continue;
    const MatchingBlock m = detail::longest_match(a, alo, ahi, b, blo, bhi, prev, cur);
    if (m.length == 0) continue;
    blocks.push_back(m);
    pending.emplace_back(alo, m.a_start, blo, m.b_start);
    pending.emplace_back(m.a_start + m.length, ahi, m.b_start + m.length, bhi);
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const MatchingBlock& x, const MatchingBlock& y) { return x.a_start < y.a_start; });
  return blocks;
}

inline std::size_t matched_characters(const std::u32string& a, const std::u32string& b) {
  std::size_t m = 0;
  for (const MatchingBlock& blk : matching_blocks(a, b)) m += blk.length;
  return m;
}

// Ratcliff-Obershelp ratio 2*M/(|a|+|b|) over characters; two empty inputs
// compare as identical.
inline double sequence_similarity(std::string_view a, std::string_view b, const SimilarityOptions& opts = {}) {
  const std::u32string ua = opts.normalize ? decode_utf8(normalize_text(a)) : decode_utf8(a);
  const std::u32string ub = opts.normalize ? decode_utf8(normalize_text(b)) : decode_utf8(b);
  const std::size_t total = ua.size() + ub.size();
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(matched_characters(ua, ub)) / static_cast<double>(total);
}

} // namespace trajaudit::metrics
