#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "oel/network.hpp"
#include "oel/stats.hpp"

namespace oel::ens {

struct EnsembleSpec {
  NetworkConfig config;
  int num_networks = 2;
  std::vector<Eigen::VectorXd> inputs;  // fixed dataset, shared by every member
  std::uint64_t master_seed = 1;
};

/// Forward pass over the whole ensemble with per-layer preactivations kept
/// for every member. Estimators below are plug-in moments over this store;
/// standard errors are delete-one jackknife over members.
class EnsembleRun {
 public:
  EnsembleRun(const EnsembleSpec& spec, int workers = 1);

  const EnsembleSpec& spec() const { return spec_; }
  int num_networks() const { return spec_.num_networks; }
  int layers() const { return spec_.config.layers; }

  /// Per-network preactivations: rows = networks, cols = layer width.
  const Eigen::MatrixXd& z(int input, int layer) const;

 private:
  EnsembleSpec spec_;
  // store_[input][layer-1]: num_networks x width(layer)
  std::vector<std::vector<Eigen::MatrixXd>> store_;
};

/// Neural-diagonal 2-point estimator (1/n) sum_i E[z_i;a z_i;b].
stats::Estimate measure_kernel(const EnsembleRun& run, int a, int b, int layer);

/// Connected single-input 4-point coefficient in the convention where the
/// decomposition carries an explicit 1/n:
///   Vhat = n * avg_{i!=j}( E[z_i^2 z_j^2] - E[z_i^2]E[z_j^2] - 2 E[z_i z_j]^2 ).
stats::Estimate measure_vertex_single(const EnsembleRun& run, int a, int layer);

/// Multi-input vertex with samples attached positionally: neuron pattern
/// i1=i2=i, i3=i4=j (i != j), all three Wick products subtracted.
stats::Estimate measure_vertex_multi(const EnsembleRun& run, const std::array<int, 4>& samples,
                                     int layer);

struct NormalizedVertex {
  double value = 0.0;
  bool degenerate = false;  // zero denominator; value then holds raw V
};

/// Dimensionless vertex. The denominator depends on the sample pattern:
/// single input K^2; (aa)(bb) (K_aa K_bb + K_ab^2)/2; (aa)(ab) K_aa K_ab;
/// (ab)(ca) (K_ab K_ac + K_aa K_bc)/2; four distinct the symmetrized
/// three-product average (also used for patterns outside this list).
NormalizedVertex normalize_vertex(double v, const std::function<double(int, int)>& kernel,
                                  const std::array<int, 4>& samples);

/// 2m-point estimator: average of z^2 products over m distinct neurons.
stats::Estimate measure_g2m(const EnsembleRun& run, int a, int layer, int m);

/// NLO metric: n * (measured 2-point - K_theory).
stats::Estimate measure_nlo_metric(const EnsembleRun& run, int a, int layer, double k_theory);

struct CorrelatorPoint {
  int layer;
  double estimate;
  double stderr_;
};

struct CorrelatorSeries {
  std::string name;
  std::string normalization;
  std::vector<CorrelatorPoint> points;
};

}  // namespace oel::ens
