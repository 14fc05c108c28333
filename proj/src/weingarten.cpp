#include "oel/weingarten.hpp"

#include <cmath>
#include <stdexcept>

#include "oel/sampling.hpp"

namespace oel {

WeingartenPair weingarten_pair(int n) {
  if (n <= 2) throw std::domain_error("weingarten_pair: defined for n > 2");
  std::int64_t d = std::int64_t(n - 1) * n * (n + 2);
  return WeingartenPair{Rational(n + 1, d), Rational(-1, d), n};
}

Rational weingarten_row_sum(int n, int m) {
  if (n < 1 || m < 1) throw std::invalid_argument("weingarten_row_sum: n, m >= 1");
  Rational r(1, 1);
  for (int k = 0; k < m; ++k) r = r * Rational(1, n + 2 * k);
  return r;
}

double c2m(int n, int m) {
  if (n < 1 || m < 1) throw std::invalid_argument("c2m: n, m >= 1");
  double r = 1.0;
  for (int k = 0; k < m; ++k) r *= double(n + 2 * k) / double(n);
  return r;
}

namespace {

// The three pair partitions of four slots: (12)(34), (13)(24), (14)(23).
inline std::array<int, 3> delta_patterns(const std::array<int, 4>& a) {
  return {a[0] == a[1] && a[2] == a[3] ? 1 : 0,
          a[0] == a[2] && a[1] == a[3] ? 1 : 0,
          a[0] == a[3] && a[1] == a[2] ? 1 : 0};
}

}  // namespace

double orthogonal_fourth_moment(int n, double cw, const std::array<int, 4>& i,
                                const std::array<int, 4>& j) {
  WeingartenPair w = weingarten_pair(n);
  for (int k = 0; k < 4; ++k)
    if (i[k] < 1 || i[k] > n || j[k] < 1 || j[k] > n)
      throw std::invalid_argument("orthogonal_fourth_moment: index out of range");
  auto pi = delta_patterns(i);
  auto pj = delta_patterns(j);
  double w11 = w.w11.value(), w2 = w.w2.value();
  double acc = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (pi[a] && pj[b]) acc += (a == b) ? w11 : w2;
  return cw * cw * acc;
}

std::pair<double, double> monte_carlo_orthogonal_moment(
    int n, double cw, const std::vector<std::pair<int, int>>& entries,
    long samples, Rng& stream) {
  if (samples < 1) throw std::invalid_argument("monte_carlo_orthogonal_moment: samples >= 1");
  double sum = 0.0, sumsq = 0.0;
  for (long s = 0; s < samples; ++s) {
    Eigen::MatrixXd o = sample_haar_orthogonal(n, cw, stream);
    double p = 1.0;
    for (const auto& [r, c] : entries) p *= o(r - 1, c - 1);
    sum += p;
    sumsq += p * p;
  }
  double mean = sum / double(samples);
  double var = (sumsq / double(samples) - mean * mean) / double(samples - 1 > 0 ? samples - 1 : 1);
  return {mean, std::sqrt(var > 0 ? var : 0.0)};
}

}  // namespace oel
