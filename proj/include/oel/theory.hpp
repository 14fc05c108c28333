#pragma once

#include <functional>
#include <vector>

#include "oel/activation.hpp"
#include "oel/network.hpp"

namespace oel::theory {

/// Gauss-Hermite nodes/weights for weight exp(-x^2); cached per node count.
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum = sqrt(pi)
};
const Quadrature& gauss_hermite(int nodes);

constexpr int kDefaultNodes = 201;

/// <f(z)>_K, the single-variable Gaussian expectation with variance K.
/// K = 0 returns f(0); K < 0 is a domain error.
double gauss_expect(const std::function<double(double)>& f, double variance,
                    int nodes = kDefaultNodes);

/// Bracket values <sigma sigma>, <sigma^4>, <sigma' sigma'> etc. evaluated
/// per activation. Scale-invariant activations (linear, relu) use the known
/// closed forms where quadrature of a step integrand would lose accuracy at
/// a node sitting on the kink.
double expect_ss(ActKind act, double variance, int nodes = kDefaultNodes);
double expect_s4(ActKind act, double variance, int nodes = kDefaultNodes);
double expect_dsds(ActKind act, double variance, int nodes = kDefaultNodes);

struct Tuning {
  double cb = 0.0;
  double cw = 1.0;
};

enum class CriticalClass { scale_invariant, kstar_zero };

struct CriticalTuning {
  double cb = 0.0;
  double cw = 1.0;
  CriticalClass cls = CriticalClass::scale_invariant;
  /// K* for a given input norm-square per input dimension (scale-invariant
  /// class); 0 for the kstar_zero class.
  double kstar(double k0) const { return cls == CriticalClass::scale_invariant ? cw * k0 : 0.0; }
};

/// (Cb, CW) = (0, 1/A) with A = <sigma'(z)^2> at the fixed point: linear ->
/// (0,1), relu -> (0,2); tanh -> (0,1) in the K* = 0 class.
CriticalTuning critical_tuning(ActKind act);

/// Iterates K_{t+1} = Cb + CW <sigma sigma>_{K_t} from K0; returns
/// [K0, K1, ..., K_L]. Aborts with overflow error past 1e12.
std::vector<double> kernel_recursion(const Tuning& tuning, double k0, ActKind act, int depth,
                                     int nodes = kDefaultNodes);

struct Susceptibilities {
  double par;   // chi_parallel
  double perp;  // chi_perp
};

/// chi_par = (CW/2K^2) <ss(z^2-K)>_K, chi_perp = CW <s's'>_K.
/// K = 0 returns the analytic limit CW * sigma'(0)^2 for both.
Susceptibilities susceptibilities(double variance, double cw, ActKind act,
                                  int nodes = kDefaultNodes);

enum class WeightScheme { gaussian, orthogonal };

/// Single-input 4-point vertex recursion (Eq.-8 coefficient convention):
///   V_{l+1} = CW^2 [ <s^4> - c <s^2>^2 ] + chi_par(K_l)^2 V_l,
/// c = 3 for orthogonal weights, 1 for Gaussian. kernel_series must come
/// from kernel_recursion with matching tuning; V1 seeds layer 1 and the
/// returned series is indexed [V1, V2, ..., V_L].
std::vector<double> vertex_recursion_single(WeightScheme scheme, ActKind act,
                                            const Tuning& tuning,
                                            const std::vector<double>& kernel_series,
                                            double v1, int nodes = kDefaultNodes);

/// Default first-layer vertex: -2 K1^2 for an orthogonal first layer, 0 for
/// a Gaussian (or mixed) first layer.
double vertex_initial_condition(WeightScheme first_layer, double k1);

struct TanhAsymptotics {
  double delta_k;  // 1/(2l)
  double v;        // -1/(2l^2)
  double v_norm;   // -2
};
TanhAsymptotics vertex_recursion_tanh_asymptotic(int layer);

/// NLO metric recursion for the K*=0 class:
///   G1_{l+1} = G1_l [1 - 4 dK_l] - 2 V_l,  G1_1 = 0.
/// The scheme only enters through the V series fed in.
std::vector<double> nlo_metric_recursion(const std::vector<double>& kernel_series,
                                         const std::vector<double>& vertex_series);

struct LrSchedule {
  std::vector<double> lambda_b;  // 1-based layer l at index l-1
  std::vector<double> lambda_w;
};

/// lambda_b^(l) = 1/l, lambda_w^(l) = 1 (tanh learning-rate equivalence).
LrSchedule lr_schedule_eq52(int layers);
/// lambda_b = lambda_w = 1/L (relu variant).
LrSchedule lr_schedule_one_over_depth(int layers);
/// Constant rates.
LrSchedule lr_schedule_uniform(int layers, double lb, double lw);

/// Frozen-NTK recursion Theta_{l+1} = lb_{l+1} + lw_{l+1} <ss>_{K_l}
/// + CW <s's'>_{K_l} Theta_l with Theta_1 = lb_1 + lw_1 K0; kernel_series
/// here starts at the input kernel K0 (index 0) so that kernel_series[l]
/// is the layer-l kernel.
std::vector<double> frozen_ntk_recursion(const Tuning& tuning, const LrSchedule& lr,
                                         const std::vector<double>& kernel_series, ActKind act,
                                         int nodes = kDefaultNodes);

struct LinearExactForms {
  double kernel;
  double g2m;
  double vertex;  // Eq.-8 convention: n * (G4 - K^2)
};

/// Closed forms for deep linear networks at width n (n > 2): orthogonal
/// K = CW^l K0, G_2m = CW^{ml} n^m / (n(n+2)...(n+2m-2)) K0^m,
/// V = -2n/(n+2) K^2; Gaussian counterpart G_2m = CW^{ml} c_2m^{l-1} K0^m.
LinearExactForms linear_exact_forms(WeightScheme scheme, int n, double cw, double k0, int layer,
                                    int m);

}  // namespace oel::theory
