#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "oel/network.hpp"
#include "oel/stats.hpp"
#include "oel/tensor.hpp"
#include "oel/theory.hpp"

namespace oel::ntk {

/// Per-layer bias rate lambda_b^(l) and weight rate lambda_w^(l); the weight
/// rate enters every contraction divided by the layer fan-in.
using LearningRateTensor = theory::LrSchedule;

/// Layer-wise propagation of the NTK and its learning-rate descendants for
/// one parameter set. Derivative tensors are contracted with the learning
/// rate tensor as they are formed; full Jacobians never materialize. State
/// per requested key: pair -> n x n kernel matrix, triple -> n^3, quad ->
/// n^4, advanced one layer at a time.
class NtkPropagator {
 public:
  struct Request {
    std::vector<std::array<int, 2>> pairs;       // NTK sample pairs
    std::vector<std::array<int, 3>> triples;     // dNTK
    std::vector<std::array<int, 4>> quads_ddi;   // first ddNTK
    std::vector<std::array<int, 4>> quads_ddii;  // second ddNTK
    std::size_t memory_budget_bytes = std::size_t(2) << 30;
  };

  NtkPropagator(const NetworkConfig& config, const ParameterSet& params,
                const LearningRateTensor& lr, const std::vector<Eigen::VectorXd>& inputs,
                Request request);

  int layer() const { return layer_; }
  int width() const { return config_.width(layer_); }
  bool done() const { return layer_ >= config_.layers; }
  void step();

  const Eigen::VectorXd& z(int sample) const { return z_.at(sample); }
  /// NTK matrix H_{i1 i2; ab} at the current layer.
  const Eigen::MatrixXd& ntk(int a, int b) const;
  const Tensor3& dntk(int a0, int a1, int a2) const;
  const Tensor4& ddntk_i(const std::array<int, 4>& q) const;
  const Tensor4& ddntk_ii(const std::array<int, 4>& q) const;

 private:
  void check_budget(const Request& request) const;

  NetworkConfig config_;
  const ParameterSet& params_;
  LearningRateTensor lr_;
  std::vector<Eigen::VectorXd> inputs_;
  int layer_ = 0;

  std::vector<Eigen::VectorXd> z_;
  std::map<std::array<int, 2>, Eigen::MatrixXd> h_;
  std::map<std::array<int, 3>, Tensor3> dh_;
  std::map<std::array<int, 4>, Tensor4> ddi_;
  std::map<std::array<int, 4>, Tensor4> ddii_;
};

/// NTK at the final layer for the requested sample pairs (Eq.-44 style
/// forward propagation).
std::map<std::array<int, 2>, Eigen::MatrixXd> ntk_forward(
    const NetworkConfig& config, const ParameterSet& params, const LearningRateTensor& lr,
    const std::vector<Eigen::VectorXd>& inputs, const std::vector<std::array<int, 2>>& pairs);

/// Final-layer dNTK tensors for the requested sample triples.
std::map<std::array<int, 3>, Tensor3> dntk(const NetworkConfig& config,
                                           const ParameterSet& params,
                                           const LearningRateTensor& lr,
                                           const std::vector<Eigen::VectorXd>& inputs,
                                           const std::vector<std::array<int, 3>>& triples,
                                           std::size_t memory_budget = std::size_t(2) << 30);

struct DdntkResult {
  std::map<std::array<int, 4>, Tensor4> first;
  std::map<std::array<int, 4>, Tensor4> second;
};
DdntkResult ddntk(const NetworkConfig& config, const ParameterSet& params,
                  const LearningRateTensor& lr, const std::vector<Eigen::VectorXd>& inputs,
                  const std::vector<std::array<int, 4>>& quads,
                  std::size_t memory_budget = std::size_t(2) << 30);

// ---------------------------------------------------------------------------
// Ensemble statistics of NTK correlators (single input).

struct NtkEnsembleSpec {
  NetworkConfig config;
  int num_networks = 2;
  Eigen::VectorXd input;
  LearningRateTensor lr;
  std::uint64_t master_seed = 1;
  bool with_dntk = true;
  bool with_ddntk = true;
  int workers = 1;
  std::size_t memory_budget_bytes = std::size_t(2) << 30;
};

/// Per-layer estimates for theta, kernel, A, B, D, F, P, Q, R, S, T, U and
/// their dimensionless (tilded) forms. Keyed by name; values indexed by
/// layer-1.
struct NtkCorrelatorTable {
  std::map<std::string, std::vector<stats::Estimate>> series;
  int layers = 0;
};

NtkCorrelatorTable measure_ntk_correlators(const NtkEnsembleSpec& spec);

/// Multi-input A, B, D, F with four samples attached as
/// DeltaH_(a1 a2), DeltaH_(a3 a4) (and z_a1 z_a2 DeltaH_(a3 a4)), normalized
/// with the symmetrized Theta / K products.
struct NtkMultiSpec {
  NetworkConfig config;
  int num_networks = 2;
  std::vector<Eigen::VectorXd> inputs;  // exactly 4
  LearningRateTensor lr;
  std::uint64_t master_seed = 1;
  int workers = 1;
};
NtkCorrelatorTable measure_ntk_fluctuations_multi(const NtkMultiSpec& spec);

// ---------------------------------------------------------------------------
// NTK components tracked during training.

struct TrackingProbe {
  enum class Mode { diag_cross_sample, cross_neural_single_sample };
  Mode mode = Mode::diag_cross_sample;
  Eigen::VectorXd probe_input;                 // test input (diag mode) or train input
  std::vector<Eigen::VectorXd> class_inputs;   // train members of the class (diag mode)
  int node = 0;                                // output node (diag mode)
  int cadence = 100;                           // epochs between evaluations
};

/// Evaluate the probed output-layer NTK component for one parameter set.
double eval_tracking_probe(const NetworkConfig& config, const ParameterSet& params,
                           const LearningRateTensor& lr, const TrackingProbe& probe);

}  // namespace oel::ntk
