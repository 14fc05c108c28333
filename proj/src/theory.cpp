#include "oel/theory.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "oel/weingarten.hpp"

namespace oel::theory {

const Quadrature& gauss_hermite(int n) {
  static std::map<int, Quadrature> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 2) throw std::invalid_argument("gauss_hermite: nodes >= 2");
  // Golub-Welsch: Jacobi matrix for Hermite polynomials, weight exp(-x^2).
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double b = std::sqrt(k / 2.0);
    jac(k - 1, k) = b;
    jac(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    q.nodes[i] = es.eigenvalues()[i];
    double v0 = es.eigenvectors()(0, i);
    q.weights[i] = sqrt_pi * v0 * v0;
  }
  return cache.emplace(n, std::move(q)).first->second;
}

double gauss_expect(const std::function<double(double)>& f, double variance, int nodes) {
  if (variance < 0.0) throw std::domain_error("gauss_expect: variance must be >= 0");
  if (variance == 0.0) return f(0.0);
  const Quadrature& q = gauss_hermite(nodes);
  double scale = std::sqrt(2.0 * variance);
  double acc = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) acc += q.weights[i] * f(scale * q.nodes[i]);
  return acc / std::sqrt(M_PI);
}

double expect_ss(ActKind act, double variance, int nodes) {
  switch (act) {
    case ActKind::linear: return variance;
    case ActKind::relu: return variance / 2.0;
    case ActKind::tanh: {
      Activation a{act};
      return gauss_expect([&](double z) { double s = a.f(z); return s * s; }, variance, nodes);
    }
  }
  return 0.0;
}

double expect_s4(ActKind act, double variance, int nodes) {
  switch (act) {
    case ActKind::linear: return 3.0 * variance * variance;
    case ActKind::relu: return 1.5 * variance * variance;
    case ActKind::tanh: {
      Activation a{act};
      return gauss_expect([&](double z) { double s = a.f(z); return s * s * s * s; }, variance,
                          nodes);
    }
  }
  return 0.0;
}

double expect_dsds(ActKind act, double variance, int nodes) {
  switch (act) {
    // Step integrands lose O(w_0) under quadrature when a node sits on the
    // kink; sigma'^2 is constant a.e. for these two, so use the exact value.
    case ActKind::linear: return 1.0;
    case ActKind::relu: return 0.5;
    case ActKind::tanh: {
      Activation a{act};
      return gauss_expect([&](double z) { double d = a.d1(z); return d * d; }, variance, nodes);
    }
  }
  return 0.0;
}

CriticalTuning critical_tuning(ActKind act) {
  switch (act) {
    case ActKind::linear: return {0.0, 1.0, CriticalClass::scale_invariant};
    case ActKind::relu: return {0.0, 2.0, CriticalClass::scale_invariant};
    case ActKind::tanh: return {0.0, 1.0, CriticalClass::kstar_zero};
  }
  throw std::invalid_argument("critical_tuning: unsupported activation");
}

std::vector<double> kernel_recursion(const Tuning& tuning, double k0, ActKind act, int depth,
                                     int nodes) {
  if (k0 < 0.0) throw std::domain_error("kernel_recursion: K0 >= 0");
  std::vector<double> k{k0};
  k.reserve(depth + 1);
  for (int l = 0; l < depth; ++l) {
    double next = tuning.cb + tuning.cw * expect_ss(act, k.back(), nodes);
    if (!(next < 1e12)) throw std::overflow_error("kernel_recursion: kernel diverged past 1e12");
    k.push_back(next);
  }
  return k;
}

Susceptibilities susceptibilities(double variance, double cw, ActKind act, int nodes) {
  if (variance < 0.0) throw std::domain_error("susceptibilities: K >= 0");
  Activation a{act};
  if (variance == 0.0) {
    double d0 = a.kind == ActKind::relu ? 0.0 : a.d1(0.0);
    // relu's sigma'(0)=0 convention is a measure-zero statement; the K->0
    // limit of the brackets is A = 1/2, matching chi_perp below.
    double lim = a.kind == ActKind::relu ? cw * 0.5 : cw * d0 * d0;
    return {lim, lim};
  }
  double perp = cw * expect_dsds(act, variance, nodes);
  double par;
  switch (act) {
    case ActKind::linear: par = cw; break;
    case ActKind::relu: par = cw / 2.0; break;  // (CW/2K^2)(<z^4>/2 - K<z^2>/2) = CW/2
    default: {
      double braket = gauss_expect(
          [&](double z) { double s = a.f(z); return s * s * (z * z - variance); }, variance,
          nodes);
      par = cw / (2.0 * variance * variance) * braket;
    }
  }
  return {par, perp};
}

std::vector<double> vertex_recursion_single(WeightScheme scheme, ActKind act,
                                            const Tuning& tuning,
                                            const std::vector<double>& kernel_series, double v1,
                                            int nodes) {
  if (kernel_series.empty()) throw std::invalid_argument("vertex_recursion_single: empty kernel");
  double c = scheme == WeightScheme::orthogonal ? 3.0 : 1.0;
  std::vector<double> v{v1};
  v.reserve(kernel_series.size());
  for (std::size_t l = 0; l + 1 < kernel_series.size(); ++l) {
    double k = kernel_series[l];
    double s4 = expect_s4(act, k, nodes);
    double s2 = expect_ss(act, k, nodes);
    double chi = susceptibilities(k, tuning.cw, act, nodes).par;
    v.push_back(tuning.cw * tuning.cw * (s4 - c * s2 * s2) + chi * chi * v.back());
  }
  return v;
}

double vertex_initial_condition(WeightScheme first_layer, double k1) {
  return first_layer == WeightScheme::orthogonal ? -2.0 * k1 * k1 : 0.0;
}

TanhAsymptotics vertex_recursion_tanh_asymptotic(int layer) {
  if (layer < 1) throw std::invalid_argument("layer >= 1");
  double dk = 1.0 / (2.0 * layer);
  return {dk, -1.0 / (2.0 * double(layer) * layer), -2.0};
}

std::vector<double> nlo_metric_recursion(const std::vector<double>& kernel_series,
                                         const std::vector<double>& vertex_series) {
  if (kernel_series.size() != vertex_series.size())
    throw std::invalid_argument("nlo_metric_recursion: series length mismatch");
  std::vector<double> g{0.0};
  g.reserve(kernel_series.size());
  for (std::size_t l = 0; l + 1 < kernel_series.size(); ++l)
    g.push_back(g.back() * (1.0 - 4.0 * kernel_series[l]) - 2.0 * vertex_series[l]);
  return g;
}

LrSchedule lr_schedule_eq52(int layers) {
  LrSchedule s;
  for (int l = 1; l <= layers; ++l) {
    s.lambda_b.push_back(1.0 / double(l));
    s.lambda_w.push_back(1.0);
  }
  return s;
}

LrSchedule lr_schedule_one_over_depth(int layers) {
  LrSchedule s;
  for (int l = 1; l <= layers; ++l) {
    s.lambda_b.push_back(1.0 / double(layers));
    s.lambda_w.push_back(1.0 / double(layers));
  }
  return s;
}

LrSchedule lr_schedule_uniform(int layers, double lb, double lw) {
  LrSchedule s;
  s.lambda_b.assign(layers, lb);
  s.lambda_w.assign(layers, lw);
  return s;
}

std::vector<double> frozen_ntk_recursion(const Tuning& tuning, const LrSchedule& lr,
                                         const std::vector<double>& kernel_series, ActKind act,
                                         int nodes) {
  if (lr.lambda_b.empty() || lr.lambda_b.size() + 1 > kernel_series.size() + 1)
    throw std::invalid_argument("frozen_ntk_recursion: schedule/kernel length mismatch");
  int layers = int(lr.lambda_b.size());
  std::vector<double> theta;
  theta.reserve(layers);
  theta.push_back(lr.lambda_b[0] + lr.lambda_w[0] * kernel_series[0]);
  for (int l = 1; l < layers; ++l) {
    double k = kernel_series[l];  // layer-l kernel
    theta.push_back(lr.lambda_b[l] + lr.lambda_w[l] * expect_ss(act, k, nodes) +
                    tuning.cw * expect_dsds(act, k, nodes) * theta.back());
  }
  return theta;
}

LinearExactForms linear_exact_forms(WeightScheme scheme, int n, double cw, double k0, int layer,
                                    int m) {
  if (n <= 2) throw std::domain_error("linear_exact_forms: n > 2");
  if (layer < 1 || m < 1) throw std::invalid_argument("linear_exact_forms: layer, m >= 1");
  double k = std::pow(cw, layer) * k0;
  double g2m;
  if (scheme == WeightScheme::orthogonal) {
    double denom = 1.0;
    for (int t = 0; t < m; ++t) denom *= double(n + 2 * t) / double(n);
    g2m = std::pow(cw, double(m) * layer) * std::pow(k0, m) / denom;
  } else {
    g2m = std::pow(cw, double(m) * layer) * std::pow(c2m(n, m), layer - 1) * std::pow(k0, m);
  }
  double vertex = scheme == WeightScheme::orthogonal
                      ? -2.0 * n / double(n + 2) * k * k
                      : 2.0 * (layer - 1) * k * k;
  return {k, g2m, vertex};
}

}  // namespace oel::theory
