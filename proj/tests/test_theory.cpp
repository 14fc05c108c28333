#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "oel/stats.hpp"
#include "oel/theory.hpp"
#include "oel/weingarten.hpp"

using namespace oel;
using namespace oel::theory;

namespace {

// Independent quadrature oracle: composite Simpson over [-w, w] standard
// deviations; deliberately not Gauss-Hermite.
double simpson_expect(const std::function<double(double)>& f, double variance) {
  if (variance == 0.0) return f(0.0);
  double sd = std::sqrt(variance);
  double a = -12.0 * sd, b = 12.0 * sd;
  const int n = 20000;  // even
  double h = (b - a) / n;
  auto g = [&](double z) {
    return f(z) * std::exp(-z * z / (2.0 * variance)) / std::sqrt(2.0 * M_PI * variance);
  };
  double acc = g(a) + g(b);
  for (int i = 1; i < n; ++i) acc += g(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

std::vector<double> layer_kernels(const Tuning& t, double k0, ActKind act, int depth) {
  std::vector<double> k = kernel_recursion(t, k0, act, depth);
  return std::vector<double>(k.begin() + 1, k.end());
}

}  // namespace

TEST_CASE("gauss_expect basics") {
  CHECK(gauss_expect([](double z) { return z * z; }, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(gauss_expect([](double z) { return z; }, 1.0) == doctest::Approx(0.0).scale(1.0));
  CHECK(gauss_expect([](double z) { return std::cos(z); }, 0.0) == 1.0);
  CHECK_THROWS_AS(gauss_expect([](double z) { return z; }, -1.0), std::domain_error);

  // frozen value from the independent 200-node-class oracle: <tanh^2>_0.01
  double via_simpson = simpson_expect([](double z) { return std::tanh(z) * std::tanh(z); }, 0.01);
  double via_gh = gauss_expect([](double z) { return std::tanh(z) * std::tanh(z); }, 0.01, 200);
  CHECK(via_gh == doctest::Approx(via_simpson).epsilon(1e-10));
  CHECK(std::abs(via_gh - 0.009802) < 1e-5);

  // relu^2 reduces to K/2 exactly under the symmetric rule
  CHECK(gauss_expect([](double z) { return z > 0 ? z * z : 0.0; }, 0.8) ==
        doctest::Approx(0.4).epsilon(1e-12));
  CHECK(expect_ss(ActKind::relu, 0.8) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(expect_s4(ActKind::relu, 0.5) == doctest::Approx(1.5 * 0.25).epsilon(1e-14));
}

TEST_CASE("quadrature converges: doubling nodes moves tanh brackets < 1e-10") {
  // measured doubling deltas for K <= 1: 3.8e-10 at 100 nodes, 7e-12 at 130,
  // 6.5e-15 at the 201-node default
  for (int nodes : {130, 201}) {
    for (double k : {0.05, 0.25, 1.0}) {
      for (auto f : {expect_ss, expect_s4, expect_dsds}) {
        double a = f(ActKind::tanh, k, nodes);
        double b = f(ActKind::tanh, k, 2 * nodes);
        CHECK(std::abs(a - b) < 1e-10);
      }
    }
  }
}

TEST_CASE("kernel recursion closed forms") {
  // linear: K_l = CW^l K0
  std::vector<double> lin = kernel_recursion({0.0, 1.7}, 0.3, ActKind::linear, 6);
  for (int l = 0; l <= 6; ++l)
    CHECK(lin[l] == doctest::Approx(std::pow(1.7, l) * 0.3).epsilon(1e-12));
  // relu at criticality: constant
  std::vector<double> relu = kernel_recursion({0.0, 2.0}, 0.41, ActKind::relu, 10);
  for (double k : relu) CHECK(k == doctest::Approx(0.41).epsilon(1e-12));
  // tanh critical: l * K_l -> 1/2
  std::vector<double> tanh_k = kernel_recursion({0.0, 1.0}, 0.2, ActKind::tanh, 50);
  CHECK(50.0 * tanh_k[50] == doctest::Approx(0.5).epsilon(0.10));
  // divergence guard
  CHECK_THROWS_AS(kernel_recursion({0.0, 100.0}, 1.0, ActKind::linear, 20), std::overflow_error);
}

TEST_CASE("criticality fixed point approach is monotone, not exponential") {
  for (ActKind act : {ActKind::linear, ActKind::relu, ActKind::tanh}) {
    CriticalTuning crit = critical_tuning(act);
    std::vector<double> k =
        kernel_recursion({crit.cb, crit.cw}, act == ActKind::tanh ? 0.3 : 0.5, act, 30);
    for (std::size_t l = 1; l + 1 < k.size(); ++l)
      CHECK(std::abs(k[l + 1] - k[l]) <= std::abs(k[l] - k[l - 1]) + 1e-15);
  }
}

TEST_CASE("off-critical kernels: vanishing and saturating regimes") {
  std::vector<double> low = kernel_recursion({0.0, 0.1}, 0.3, ActKind::tanh, 40);
  // ratio test K_{l+1}/K_l -> CW as K -> 0; deeper layers underflow to 0
  CHECK(low[12] / low[11] == doctest::Approx(0.1).epsilon(0.02));
  CHECK(low[40] < 1e-20);
  std::vector<double> high = kernel_recursion({0.0, 10.0}, 0.3, ActKind::tanh, 60);
  CHECK(high[60] > high[0]);
  CHECK(high[60] == doctest::Approx(high[59]).epsilon(1e-6));  // tanh bound saturation
  CHECK(high[60] < 10.5);
}

TEST_CASE("susceptibilities") {
  // cross-oracle: the defining bracket via an independent rule
  for (double k : {0.05, 0.1, 0.4}) {
    double via_simpson =
        simpson_expect(
            [&](double z) { return std::tanh(z) * std::tanh(z) * (z * z - k); }, k) /
        (2.0 * k * k);
    CHECK(susceptibilities(k, 1.0, ActKind::tanh).par ==
          doctest::Approx(via_simpson).epsilon(1e-9));
  }
  // series consistency: chi_par = 1 - 4K + 17K^2 + O(K^3); halving K cuts
  // the residual ~8x (exact chi_par(0.1) = 0.7160, so the truncation gap at
  // K = 0.1 is 0.054, not inside 0.02)
  double r1 = std::abs(susceptibilities(0.1, 1.0, ActKind::tanh).par - (1 - 0.4 + 0.17));
  double r2 = std::abs(susceptibilities(0.05, 1.0, ActKind::tanh).par -
                       (1 - 4 * 0.05 + 17 * 0.05 * 0.05));
  CHECK(r1 < 0.06);
  CHECK(r1 / r2 == doctest::Approx(8.0).epsilon(0.35));
  Susceptibilities chi = susceptibilities(0.1, 1.0, ActKind::tanh);
  CHECK(susceptibilities(1e-9, 1.0, ActKind::tanh).perp == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(susceptibilities(0.0, 1.0, ActKind::tanh).par == doctest::Approx(1.0));
  for (double k : {0.1, 0.7, 2.0}) {
    Susceptibilities r = susceptibilities(k, 2.0, ActKind::relu);
    CHECK(r.par == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.perp == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(susceptibilities(-0.1, 1.0, ActKind::tanh), std::domain_error);
}

TEST_CASE("critical tunings") {
  CHECK(critical_tuning(ActKind::linear).cw == doctest::Approx(1.0));
  CHECK(critical_tuning(ActKind::relu).cw == doctest::Approx(2.0));
  CHECK(critical_tuning(ActKind::tanh).cw == doctest::Approx(1.0));
  CHECK(critical_tuning(ActKind::tanh).cls == CriticalClass::kstar_zero);
  CHECK(critical_tuning(ActKind::linear).cb == 0.0);
}

TEST_CASE("vertex recursion: relu closed forms") {
  Tuning t{0.0, 2.0};
  double kstar = 0.37;
  std::vector<double> kser(50, kstar);  // layer 1..50 at the fixed point
  double v1 = vertex_initial_condition(WeightScheme::orthogonal, kstar);
  std::vector<double> v_orth =
      vertex_recursion_single(WeightScheme::orthogonal, ActKind::relu, t, kser, v1);
  for (int l : {1, 2, 4, 10}) {
    double vnorm = v_orth[l - 1] / (kstar * kstar);
    CHECK(vnorm == doctest::Approx(3.0 * l - 5.0).epsilon(1e-10));
  }
  std::vector<double> v_gauss =
      vertex_recursion_single(WeightScheme::gaussian, ActKind::relu, t, kser, 0.0);
  std::vector<double> x, y, sig;
  for (int l = 10; l <= 50; ++l) {
    x.push_back(l);
    y.push_back(v_gauss[l - 1] / (kstar * kstar));
    sig.push_back(1.0);
  }
  stats::SlopeFit fit = stats::wls_slope(x, y, sig);
  CHECK(fit.slope == doctest::Approx(5.0).epsilon(0.01));
}

TEST_CASE("vertex recursion: tanh approaches the -2 fixed point") {
  Tuning t{0.0, 1.0};
  std::vector<double> kser = layer_kernels(t, 0.3, ActKind::tanh, 200);
  double v1 = vertex_initial_condition(WeightScheme::orthogonal, kser[0]);
  std::vector<double> v =
      vertex_recursion_single(WeightScheme::orthogonal, ActKind::tanh, t, kser, v1);
  double vnorm200 = v[199] / (kser[199] * kser[199]);
  CHECK(vnorm200 == doctest::Approx(-2.0).epsilon(0.05));
  // mixed init (V1 = 0) flows to the same fixed point
  std::vector<double> vm =
      vertex_recursion_single(WeightScheme::orthogonal, ActKind::tanh, t, kser, 0.0);
  CHECK(vm[199] / (kser[199] * kser[199]) == doctest::Approx(-2.0).epsilon(0.10));
}

TEST_CASE("tanh asymptotics and consistency with the recursion") {
  TanhAsymptotics a10 = vertex_recursion_tanh_asymptotic(10);
  CHECK(a10.delta_k == doctest::Approx(0.05));
  CHECK(a10.v == doctest::Approx(-0.005));
  CHECK(a10.v_norm == -2.0);
  CHECK(vertex_recursion_tanh_asymptotic(77).v_norm == -2.0);

  Tuning t{0.0, 1.0};
  std::vector<double> kser = layer_kernels(t, 0.3, ActKind::tanh, 100);
  double v1 = vertex_initial_condition(WeightScheme::orthogonal, kser[0]);
  std::vector<double> v =
      vertex_recursion_single(WeightScheme::orthogonal, ActKind::tanh, t, kser, v1);
  CHECK(v[99] == doctest::Approx(vertex_recursion_tanh_asymptotic(100).v).epsilon(0.10));
}

TEST_CASE("gaussian-vs-orthogonal vertex difference is 2 CW^2 <s^2>^2 per step") {
  Tuning t{0.0, 1.0};
  for (double k : {0.05, 0.2}) {
    std::vector<double> kser{k, k};
    double v_start = -0.01;
    double vg =
        vertex_recursion_single(WeightScheme::gaussian, ActKind::tanh, t, kser, v_start)[1];
    double vo =
        vertex_recursion_single(WeightScheme::orthogonal, ActKind::tanh, t, kser, v_start)[1];
    double s2 = expect_ss(ActKind::tanh, k);
    CHECK(vg - vo == doctest::Approx(2.0 * s2 * s2).epsilon(1e-10));
  }
}

TEST_CASE("NLO metric recursion") {
  Tuning t{0.0, 1.0};
  std::vector<double> kser = layer_kernels(t, 0.3, ActKind::tanh, 100);
  double v1 = vertex_initial_condition(WeightScheme::orthogonal, kser[0]);
  std::vector<double> vser =
      vertex_recursion_single(WeightScheme::orthogonal, ActKind::tanh, t, kser, v1);
  std::vector<double> g = nlo_metric_recursion(kser, vser);
  CHECK(100.0 * g[99] == doctest::Approx(1.0).epsilon(0.10));
  // combined metric identity at n = 50
  double n = 50.0;
  CHECK(kser[99] + g[99] / n ==
        doctest::Approx(1.0 / 200.0 * (1.0 + 2.0 / n)).epsilon(0.10));
  // gaussian: G1 approaches a nonzero constant, so G1/K grows like l
  std::vector<double> kser2 = layer_kernels(t, 0.3, ActKind::tanh, 400);
  std::vector<double> vg =
      vertex_recursion_single(WeightScheme::gaussian, ActKind::tanh, t, kser2, 0.0);
  std::vector<double> gg = nlo_metric_recursion(kser2, vg);
  CHECK(std::abs(gg[399]) > 0.01);
  CHECK(gg[399] == doctest::Approx(gg[299]).epsilon(0.05));
  double ratio_200 = gg[199] / kser2[199];
  double ratio_400 = gg[399] / kser2[399];
  CHECK(ratio_400 / ratio_200 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("frozen NTK recursion") {
  Tuning t{0.0, 1.0};
  double k0 = 1.0 / 3.0;
  std::vector<double> kser = kernel_recursion(t, k0, ActKind::tanh, 10);
  LrSchedule lr = lr_schedule_eq52(10);
  std::vector<double> theta = frozen_ntk_recursion(t, lr, kser, ActKind::tanh);
  CHECK(theta[0] == doctest::Approx(lr.lambda_b[0] + lr.lambda_w[0] * k0).epsilon(1e-12));
  // per-layer increments Theta_{l+1} - chi_perp Theta_l stay comparable
  double lo = 1e300, hi = 0;
  for (int l = 1; l < 10; ++l) {
    double chi = susceptibilities(kser[l], t.cw, ActKind::tanh).perp;
    double inc = theta[l] - chi * theta[l - 1];
    CHECK(inc > 0);
    lo = std::min(lo, inc);
    hi = std::max(hi, inc);
  }
  CHECK(hi / lo < 10.0);

  // relu with the 1/L schedule: equal contributions per layer by design
  Tuning tr{0.0, 2.0};
  std::vector<double> kr = kernel_recursion(tr, 0.5, ActKind::relu, 10);
  LrSchedule lr_relu = lr_schedule_one_over_depth(10);
  std::vector<double> theta_r = frozen_ntk_recursion(tr, lr_relu, kr, ActKind::relu);
  double lo_r = 1e300, hi_r = 0;
  for (int l = 1; l < 10; ++l) {
    double chi = susceptibilities(kr[l], tr.cw, ActKind::relu).perp;
    double inc = theta_r[l] - chi * theta_r[l - 1];
    lo_r = std::min(lo_r, inc);
    hi_r = std::max(hi_r, inc);
  }
  CHECK(hi_r / lo_r == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("linear exact forms") {
  const int n = 100;
  double k0 = 0.29;
  LinearExactForms o = linear_exact_forms(WeightScheme::orthogonal, n, 1.0, k0, 5, 2);
  CHECK(o.kernel == doctest::Approx(k0));
  CHECK(o.g2m == doctest::Approx(double(n) / (n + 2) * k0 * k0).epsilon(1e-12));
  CHECK(o.vertex == doctest::Approx(-2.0 * n / (n + 2) * k0 * k0).epsilon(1e-12));
  LinearExactForms g1 = linear_exact_forms(WeightScheme::gaussian, n, 1.0, k0, 1, 2);
  CHECK(g1.g2m == doctest::Approx(k0 * k0).epsilon(1e-12));  // first layer Wick
  LinearExactForms g3 = linear_exact_forms(WeightScheme::gaussian, n, 1.0, k0, 3, 2);
  CHECK(g3.g2m == doctest::Approx(std::pow(c2m(n, 2), 2) * k0 * k0).epsilon(1e-12));
  CHECK(g3.vertex == doctest::Approx(2.0 * 2 * k0 * k0).epsilon(1e-12));
  // m = 1 reduces to the kernel
  LinearExactForms m1 = linear_exact_forms(WeightScheme::orthogonal, n, 1.3, k0, 4, 1);
  CHECK(m1.g2m == doctest::Approx(m1.kernel).epsilon(1e-12));
  CHECK_THROWS_AS(linear_exact_forms(WeightScheme::orthogonal, 2, 1.0, k0, 1, 2),
                  std::domain_error);
}
