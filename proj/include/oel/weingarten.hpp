#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "oel/rational.hpp"
#include "oel/rng.hpp"

namespace oel {

/// Fourth-moment Weingarten factors of the orthogonal group O(n):
///   w11 = (n+1) / ((n-1) n (n+2)),   w2 = -1 / ((n-1) n (n+2)).
/// Held as exact fractions so the row-sum cancellation w11 + 2 w2 =
/// 1/(n(n+2)) is an identity, not an approximation.
struct WeingartenPair {
  Rational w11;
  Rational w2;
  int n = 0;

  Rational row_sum() const { return w11 + w2 + w2; }
};

/// Exact fourth-moment factors; valid for n > 2 only.
WeingartenPair weingarten_pair(int n);

/// Row sum of the general 2m-point orthogonal Weingarten matrix:
/// 1 / (n (n+2) (n+4) ... (n+2m-2)), as an exact fraction.
Rational weingarten_row_sum(int n, int m);

/// Wick-pairing combinatorial factor c_{2m}(n) = n(n+2)...(n+2m-2) / n^m.
double c2m(int n, int m);

/// Exact E[W_{i1 j1} W_{i2 j2} W_{i3 j3} W_{i4 j4}] for W = sqrt(CW) * O with
/// O Haar on O(n): the bilinear delta-pattern form with the Weingarten
/// matrix sandwiched between the three pairings on each side. Indices are
/// 1-based.
double orthogonal_fourth_moment(int n, double cw, const std::array<int, 4>& i,
                                const std::array<int, 4>& j);

/// Monte Carlo mean and standard error of a product of entries
/// prod_k O(i_k, j_k) over independent Haar draws scaled by sqrt(CW).
/// Entries are 1-based (i, j) pairs.
std::pair<double, double> monte_carlo_orthogonal_moment(
    int n, double cw, const std::vector<std::pair<int, int>>& entries,
    long samples, Rng& stream);

}  // namespace oel
