#pragma once

// Tie-aware rank statistics: fractional ranks, Spearman's rank correlation
// with significance, and average precision at a rating threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "iconika/common.hpp"

namespace iconika {

enum class PValueMethod { t_approximation, exact_permutation };

inline std::string_view to_string(PValueMethod m) {
  return m == PValueMethod::t_approximation ? "t-approximation" : "exact-permutation";
}

struct CorrelationResult {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  PValueMethod method = PValueMethod::t_approximation;
  // Set when an input is constant (rho reported as 0) or n is too small for
  // the requested significance method (p reported as 1).
  bool degenerate = false;
};

struct PValue {
  double value = 1.0;
  bool degenerate = false;
};

// Largest n for which exhaustive permutation p-values are computed.
inline constexpr std::size_t kMaxExactPermutationN = 8;

// Ranks 1..n, higher score -> higher rank, ties get the mean of the
// positions they occupy.
inline Vector fractional_ranks(std::span<const double> scores) {
  const std::size_t n = scores.size();
  if (n == 0) throw std::invalid_argument("fractional_ranks: empty input");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("fractional_ranks: non-finite score");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  Vector ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    // positions i+1 .. j+1 share the mean rank
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace detail {

// Twice the centred rank, an exact integer for fractional ranks.
inline std::vector<std::int64_t> doubled_centred_ranks(std::span<const double> ranks) {
  const auto n = static_cast<std::int64_t>(ranks.size());
  std::vector<std::int64_t> out(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) out[i] = std::llround(2.0 * ranks[i]) - (n + 1);
  return out;
}

// Fraction of the n! orderings of b whose |sum a_i b_pi(i)| reaches |observed|.
inline double permutation_tail(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b,
                               std::int64_t observed) {
  std::vector<std::size_t> perm(b.size());
  std::iota(perm.begin(), perm.end(), 0);
  const std::int64_t target = observed < 0 ? -observed : observed;
  std::uint64_t hits = 0, total = 0;
  do {
    std::int64_t s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[perm[i]];
    if ((s < 0 ? -s : s) >= target) ++hits;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace detail

// Significance of a rank correlation under the no-association null.
//
// t-approximation: t = rho sqrt((n-2)/(1-rho^2)), two-sided Student-t with
// n-2 degrees of freedom. For n < 4 the approximation is not used and
// p = 1 is returned flagged as degenerate.
//
// exact-permutation: fraction of the n! orderings of untied ranks 1..n whose
// |rho| reaches the given |rho|. Requires n <= 8.
inline PValue spearman_pvalue(double rho, std::size_t n, PValueMethod method = PValueMethod::t_approximation) {
  if (n < 2) throw std::invalid_argument("spearman_pvalue: n must be at least 2");
  if (!(std::abs(rho) <= 1.0 + 1e-12)) throw std::invalid_argument("spearman_pvalue: |rho| must not exceed 1");
  rho = std::clamp(rho, -1.0, 1.0);

  if (method == PValueMethod::exact_permutation) {
    if (n > kMaxExactPermutationN)
      throw std::invalid_argument(fmt::format("spearman_pvalue: exact permutation limited to n <= {}", kMaxExactPermutationN));
    Vector ranks(n);
    std::iota(ranks.begin(), ranks.end(), 1.0);
    const auto c = detail::doubled_centred_ranks(ranks);
    std::int64_t denom = 0;
    for (auto v : c) denom += v * v;
    // The statistic is an integer, so |S| >= |rho| D  <=>  |S| >= ceil(|rho| D).
    const auto observed = static_cast<std::int64_t>(std::ceil(std::abs(rho) * static_cast<double>(denom) - 1e-6));
    return {detail::permutation_tail(c, c, observed), false};
  }

  if (n < 4) return {1.0, true};
  if (std::abs(rho) >= 1.0) return {0.0, false};
  const double dof = static_cast<double>(n - 2);
  const double t = rho * std::sqrt(dof / ((1.0 - rho) * (1.0 + rho)));
  const boost::math::students_t_distribution<double> dist(dof);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return {std::clamp(p, 0.0, 1.0), false};
}

// Spearman's rank correlation: Pearson correlation of fractional ranks.
// Under exact-permutation the tie structure of the data is kept: the null
// distribution permutes the observed ranks of b.
inline CorrelationResult spearman(std::span<const double> a, std::span<const double> b,
                                  PValueMethod method = PValueMethod::t_approximation) {
  if (a.size() != b.size())
    throw std::invalid_argument(fmt::format("spearman: length mismatch ({} vs {})", a.size(), b.size()));
  if (a.size() < 2) throw std::invalid_argument("spearman: need at least 2 observations");

  const std::size_t n = a.size();
  const Vector ra = fractional_ranks(a);
  const Vector rb = fractional_ranks(b);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }

  CorrelationResult out;
  out.n = n;
  out.method = method;
  if (saa == 0.0 || sbb == 0.0) {
    out.rho = 0.0;
    out.p_value = 1.0;
    out.degenerate = true;
    return out;
  }
  out.rho = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);

  if (method == PValueMethod::exact_permutation) {
    if (n > kMaxExactPermutationN)
      throw std::invalid_argument(fmt::format("spearman: exact permutation limited to n <= {}", kMaxExactPermutationN));
    const auto ca = detail::doubled_centred_ranks(ra);
    const auto cb = detail::doubled_centred_ranks(rb);
    std::int64_t observed = 0;
    for (std::size_t i = 0; i < n; ++i) observed += ca[i] * cb[i];
    out.p_value = detail::permutation_tail(ca, cb, observed);
  } else {
    const PValue p = spearman_pvalue(out.rho, n, method);
    out.p_value = p.value;
    out.degenerate = p.degenerate;
  }
  return out;
}

// Average precision of the ranking induced by scores, with positives being
// ratings strictly above alpha. Score ties are broken by ascending tie_keys
// (typically image ids), then by position.
template <typename Rating>
double average_precision(std::span<const double> scores, std::span<const Rating> ratings, double alpha = 1.5,
                         std::span<const std::string> tie_keys = {}) {
  if (scores.size() != ratings.size())
    throw std::invalid_argument(fmt::format("average_precision: length mismatch ({} vs {})", scores.size(), ratings.size()));
  if (!tie_keys.empty() && tie_keys.size() != scores.size())
    throw std::invalid_argument("average_precision: tie_keys length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (scores[i] != scores[j]) return scores[i] > scores[j];
    if (!tie_keys.empty() && tie_keys[i] != tie_keys[j]) return tie_keys[i] < tie_keys[j];
    return i < j;
  });
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (static_cast<double>(ratings[order[k]]) > alpha) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) throw std::invalid_argument("average_precision: no positives above alpha, AP undefined");
  return sum / static_cast<double>(hits);
}

template <typename Rating>
double average_precision(const std::vector<double>& scores, const std::vector<Rating>& ratings, double alpha = 1.5,
                         const std::vector<std::string>& tie_keys = {}) {
  return average_precision(std::span<const double>(scores), std::span<const Rating>(ratings), alpha,
                           std::span<const std::string>(tie_keys));
}

}  // namespace iconika
