#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oel/dataset.hpp"
#include "oel/ensemble.hpp"
#include "oel/theory.hpp"

using namespace oel;
using namespace oel::ens;

namespace {

EnsembleSpec make_spec(int n, int depth, ActKind act, InitKind init, double cw, int nets,
                       int ninputs = 1, std::uint64_t seed = 404) {
  EnsembleSpec spec;
  spec.config.n_in = spec.config.n_hidden = spec.config.n_out = n;
  spec.config.layers = depth;
  spec.config.act = act;
  spec.config.init = {init, cw, 0.0};
  spec.num_networks = nets;
  spec.inputs = data::random_inputs(n, ninputs, seed);
  spec.master_seed = seed + 1;
  return spec;
}

}  // namespace

TEST_CASE("kernel estimator: linear closed forms") {
  // CW = 1 orthogonal: K = ||x||^2 / n0 at every layer
  EnsembleSpec spec = make_spec(48, 5, ActKind::linear, InitKind::orthogonal, 1.0, 300);
  double k0 = spec.inputs[0].squaredNorm() / 48.0;
  EnsembleRun run(spec, 2);
  for (int l = 1; l <= 5; ++l) {
    stats::Estimate e = measure_kernel(run, 0, 0, l);
    CHECK(std::abs(e.value - k0) < 3 * e.stderr_);
    CHECK(e.stderr_ > 0);
  }
  // CW = 2 gaussian, depth 3: K_3 = 8 k0
  EnsembleSpec s2 = make_spec(48, 3, ActKind::linear, InitKind::gaussian, 2.0, 2000, 1, 405);
  double k02 = s2.inputs[0].squaredNorm() / 48.0;
  EnsembleRun run2(s2, 2);
  stats::Estimate e3 = measure_kernel(run2, 0, 0, 3);
  CHECK(std::abs(e3.value - 8.0 * k02) < 3 * e3.stderr_);
}

TEST_CASE("vertex estimator: linear orthogonal exact value at every layer") {
  const int n = 60, nets = 1500;
  EnsembleSpec spec = make_spec(n, 4, ActKind::linear, InitKind::orthogonal, 1.0, nets);
  EnsembleRun run(spec, 2);
  double k0 = spec.inputs[0].squaredNorm() / n;
  double expect = theory::linear_exact_forms(theory::WeightScheme::orthogonal, n, 1.0, k0, 1, 2)
                      .vertex;  // -2n/(n+2) k0^2, depth independent
  for (int l = 1; l <= 4; ++l) {
    stats::Estimate v = measure_vertex_single(run, 0, l);
    CHECK(std::abs(v.value - expect) < 3 * v.stderr_);
  }
}

TEST_CASE("vertex estimator: linear gaussian grows as 2(l-1) K^2") {
  const int n = 60, nets = 1500;
  EnsembleSpec spec = make_spec(n, 5, ActKind::linear, InitKind::gaussian, 1.0, nets, 1, 406);
  EnsembleRun run(spec, 2);
  double k0 = spec.inputs[0].squaredNorm() / n;
  for (int l = 1; l <= 5; ++l) {
    stats::Estimate v = measure_vertex_single(run, 0, l);
    double expect = 2.0 * (l - 1) * k0 * k0;
    CHECK(std::abs(v.value - expect) < 3 * v.stderr_ + 0.02 * k0 * k0);
  }
}

TEST_CASE("vertex estimator: mixed init kills V at every layer (linear)") {
  EnsembleSpec spec = make_spec(50, 5, ActKind::linear, InitKind::mixed, 1.0, 1200, 1, 407);
  EnsembleRun run(spec, 2);
  for (int l = 1; l <= 5; ++l) {
    stats::Estimate v = measure_vertex_single(run, 0, l);
    CHECK(std::abs(v.value) < 3 * v.stderr_);
  }
}

TEST_CASE("multi-input vertex: degenerate pattern reduces to single-input bit-exactly") {
  EnsembleSpec spec = make_spec(20, 3, ActKind::tanh, InitKind::orthogonal, 1.0, 50, 1, 408);
  EnsembleRun run(spec, 2);
  for (int l = 1; l <= 3; ++l) {
    stats::Estimate a = measure_vertex_single(run, 0, l);
    stats::Estimate b = measure_vertex_multi(run, {0, 0, 0, 0}, l);
    CHECK(a.value == b.value);
    CHECK(a.stderr_ == b.stderr_);
  }
}

TEST_CASE("multi-input vertex: algebraic pattern symmetries are exact") {
  EnsembleSpec spec = make_spec(16, 2, ActKind::tanh, InitKind::gaussian, 1.0, 60, 4, 409);
  EnsembleRun run(spec, 2);
  stats::Estimate v = measure_vertex_multi(run, {0, 1, 2, 3}, 2);
  CHECK(measure_vertex_multi(run, {1, 0, 2, 3}, 2).value == v.value);   // a1 <-> a2
  CHECK(measure_vertex_multi(run, {0, 1, 3, 2}, 2).value == v.value);   // a3 <-> a4
  CHECK(measure_vertex_multi(run, {2, 3, 0, 1}, 2).value == v.value);   // pair swap
}

TEST_CASE("normalize_vertex patterns") {
  auto kernel = [](int a, int b) {
    // K_aa = 2, K_bb = 3, K_ab = 0.5 etc.; diagonal-heavy toy table
    if (a == b) return 2.0 + a;
    return 0.5;
  };
  NormalizedVertex single = normalize_vertex(-2.0 * 4.0, kernel, {0, 0, 0, 0});
  CHECK(single.value == doctest::Approx(-2.0));
  CHECK_FALSE(single.degenerate);
  CHECK(normalize_vertex(0.0, kernel, {0, 0, 1, 1}).value == 0.0);
  // 2-2 pattern: denominator (K_aa K_bb + K_ab^2)/2
  double d22 = 0.5 * (2.0 * 3.0 + 0.25);
  CHECK(normalize_vertex(d22, kernel, {0, 0, 1, 1}).value == doctest::Approx(1.0));
  // orthogonal inputs: K_ab = 0 -> denominator K_aa K_bb / 2
  auto ortho_kernel = [](int a, int b) { return a == b ? 2.0 : 0.0; };
  CHECK(normalize_vertex(2.0, ortho_kernel, {0, 0, 1, 1}).value == doctest::Approx(1.0));
  // 3-1 pattern: K_aa K_ab
  CHECK(normalize_vertex(2.0 * 0.5, kernel, {0, 0, 0, 1}).value == doctest::Approx(1.0));
  CHECK(normalize_vertex(2.0 * 0.5, kernel, {1, 0, 0, 0}).value == doctest::Approx(1.0));
  // three distinct: (K_ab K_ac + K_aa K_bc)/2 with shared sample a=0
  double d31 = 0.5 * (0.5 * 0.5 + 2.0 * 0.5);
  CHECK(normalize_vertex(d31, kernel, {0, 1, 2, 0}).value == doctest::Approx(1.0));
  // four distinct: symmetrized average of three products
  double d4 = (0.5 * 0.5 + 0.5 * 0.5 + 0.5 * 0.5) / 3.0;
  CHECK(normalize_vertex(d4, kernel, {0, 1, 2, 3}).value == doctest::Approx(1.0));
  // zero denominator reports raw V with the degenerate flag
  auto zero_kernel = [](int, int) { return 0.0; };
  NormalizedVertex deg = normalize_vertex(0.7, zero_kernel, {0, 0, 0, 0});
  CHECK(deg.degenerate);
  CHECK(deg.value == 0.7);
}

TEST_CASE("g2m estimator") {
  const int n = 50, nets = 1500;
  EnsembleSpec spec = make_spec(n, 3, ActKind::linear, InitKind::orthogonal, 1.0, nets, 1, 410);
  EnsembleRun run(spec, 2);
  double k0 = spec.inputs[0].squaredNorm() / n;
  // m = 1 reduces to the kernel estimator
  stats::Estimate g1 = measure_g2m(run, 0, 2, 1);
  stats::Estimate k = measure_kernel(run, 0, 0, 2);
  CHECK(g1.value == doctest::Approx(k.value).epsilon(1e-12));
  // orthogonal: G4 = n/(n+2) k0^2 at every layer
  for (int l = 1; l <= 3; ++l) {
    stats::Estimate g = measure_g2m(run, 0, l, 2);
    CHECK(std::abs(g.value - double(n) / (n + 2) * k0 * k0) < 3 * g.stderr_);
  }
  CHECK_THROWS_AS(measure_g2m(run, 0, 1, 5), std::invalid_argument);

  // gaussian: G4 at layer l is c4^(l-1) k0^2
  EnsembleSpec sg = make_spec(n, 3, ActKind::linear, InitKind::gaussian, 1.0, nets, 1, 411);
  EnsembleRun rung(sg, 2);
  double k0g = sg.inputs[0].squaredNorm() / n;
  for (int l = 1; l <= 3; ++l) {
    stats::Estimate g = measure_g2m(rung, 0, l, 2);
    double expect = std::pow(c2m(n, 2), l - 1) * k0g * k0g;
    CHECK(std::abs(g.value - expect) < 3 * g.stderr_);
  }
}

TEST_CASE("nlo metric estimator vanishes for exact linear orthogonal kernels") {
  const int n = 40;
  EnsembleSpec spec = make_spec(n, 4, ActKind::linear, InitKind::orthogonal, 1.0, 2000, 1, 412);
  EnsembleRun run(spec, 2);
  double k0 = spec.inputs[0].squaredNorm() / n;
  for (int l = 1; l <= 4; ++l) {
    stats::Estimate g = measure_nlo_metric(run, 0, l, k0);
    CHECK(std::abs(g.value) < 3 * g.stderr_);
  }
}

TEST_CASE("standard errors shrink like 1/sqrt(N)") {
  EnsembleSpec a = make_spec(40, 2, ActKind::tanh, InitKind::gaussian, 1.0, 400, 1, 413);
  EnsembleSpec b = a;
  b.num_networks = 1600;
  b.master_seed = 999;
  stats::Estimate ea = measure_kernel(EnsembleRun(a, 2), 0, 0, 2);
  stats::Estimate eb = measure_kernel(EnsembleRun(b, 2), 0, 0, 2);
  CHECK(ea.stderr_ / eb.stderr_ == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("tanh depth trend: mixed-init vertex flows toward -2") {
  const int n = 100, nets = 600;
  EnsembleSpec spec = make_spec(n, 10, ActKind::tanh, InitKind::mixed, 1.0, nets, 1, 414);
  EnsembleRun run(spec, 2);
  auto vnorm = [&](int l) {
    stats::Estimate v = measure_vertex_single(run, 0, l);
    stats::Estimate k = measure_kernel(run, 0, 0, l);
    return std::pair<double, double>(v.value / (k.value * k.value),
                                     v.stderr_ / (k.value * k.value));
  };
  auto [v2, s2] = vnorm(2);
  auto [v10, s10] = vnorm(10);
  CHECK(std::abs(v10 + 2.0) < std::abs(v2 + 2.0) + 3 * std::hypot(s2, s10));
}

TEST_CASE("ensemble spec validation") {
  EnsembleSpec spec = make_spec(8, 2, ActKind::tanh, InitKind::gaussian, 1.0, 1);
  CHECK_THROWS_AS(EnsembleRun(spec, 1), std::invalid_argument);  // < 2 networks
  spec.num_networks = 4;
  spec.inputs.clear();
  CHECK_THROWS_AS(EnsembleRun(spec, 1), std::invalid_argument);  // no inputs
}
