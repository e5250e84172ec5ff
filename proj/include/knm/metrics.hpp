#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knm/errors.hpp"
#include "knm/tokenizer.hpp"

namespace knm {

/// Percentage of positions where prediction equals the reference.
inline double token_accuracy(std::span<const TokenId> predictions, std::span<const TokenId> actuals) {
  if (predictions.size() != actuals.size()) {
    throw LengthMismatch("token_accuracy: " + std::to_string(predictions.size()) +
                         " predictions vs " + std::to_string(actuals.size()) + " references");
  }
  if (actuals.empty()) throw EmptyInput("token_accuracy: no tokens");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < actuals.size(); ++i) hits += predictions[i] == actuals[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(actuals.size());
}

namespace detail {

// Bit-parallel edit distance (Myers/Hyyrö) for patterns of at most 64 bytes.
inline std::size_t levenshtein_bitparallel(std::string_view pattern, std::string_view text) {
  const std::size_t m = pattern.size();
  std::array<std::uint64_t, 256> peq{};
  for (std::size_t i = 0; i < m; ++i) peq[static_cast<unsigned char>(pattern[i])] |= 1ULL << i;
  const std::uint64_t high = 1ULL << (m - 1);
  std::uint64_t pv = m == 64 ? ~0ULL : (1ULL << m) - 1;
  std::uint64_t mv = 0;
  std::size_t score = m;
  for (char ch : text) {
    const std::uint64_t eq = peq[static_cast<unsigned char>(ch)];
    const std::uint64_t xv = eq | mv;
    const std::uint64_t xh = (((eq & pv) + pv) ^ pv) | eq;
    std::uint64_t ph = mv | ~(xh | pv);
    std::uint64_t mh = pv & xh;
    if (ph & high) {
      ++score;
    } else if (mh & high) {
      --score;
    }
    ph = (ph << 1) | 1;
    mh <<= 1;
    pv = mh | ~(xv | ph);
    mv = ph & xv;
  }
  return score;
}

inline std::size_t levenshtein_rows(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

/// Byte-level Levenshtein distance (unit insert/delete/substitute).
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() > b.size()) std::swap(a, b);
  if (a.empty()) return b.size();
  if (a.size() <= 64) return detail::levenshtein_bitparallel(a, b);
  return detail::levenshtein_rows(a, b);
}

/// 100 * (1 - distance / longer length); two empty strings are identical.
inline double edit_similarity(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 100.0;
  return 100.0 * (1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest));
}

inline std::string_view rstrip(std::string_view s) {
  const auto end = s.find_last_not_of(" \t\r\n\f\v");
  return end == std::string_view::npos ? std::string_view{} : s.substr(0, end + 1);
}

/// 1 iff the strings match after stripping trailing whitespace.
inline int exact_match(std::string_view a, std::string_view b) { return rstrip(a) == rstrip(b) ? 1 : 0; }

/// Text of a line for EM/ES scoring: tokens joined by single spaces, except
/// no space before ) ] } ; and ,. END-OF-LINE tokens are dropped.
inline std::string render_line(std::span<const TokenId> ids, const Vocabulary& vocab) {
  static constexpr std::string_view kClosers = ")]};,";
  std::string out;
  for (TokenId id : ids) {
    if (id == kEolId) continue;
    const auto& tok = vocab.token(id);
    const bool closer = tok.size() == 1 && kClosers.find(tok[0]) != std::string_view::npos;
    if (!out.empty() && !closer) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace knm
