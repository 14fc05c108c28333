#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "oel/activation.hpp"
#include "oel/rng.hpp"

namespace oel {

enum class InitKind { gaussian, orthogonal, mixed };

InitKind init_from_string(const std::string& s);
const char* to_string(InitKind k);

struct InitScheme {
  InitKind kind = InitKind::gaussian;
  double cw = 1.0;  // weight variance scale, fan-in convention
  double cb = 0.0;  // bias variance
};

/// Rectangular MLP: layers 1..L-1 share hidden width n; layer L has width
/// n_out. Layer l maps width(l-1) -> width(l) with width(0) = n_in.
struct NetworkConfig {
  int n_in = 1;
  int n_hidden = 1;
  int n_out = 1;
  int layers = 1;  // total layers L; hidden depth is L-1
  ActKind act = ActKind::tanh;
  InitScheme init;

  int width(int l) const {
    if (l == 0) return n_in;
    if (l == layers) return n_out;
    return n_hidden;
  }
  void validate() const;
};

struct ParameterSet {
  std::vector<Eigen::MatrixXd> weights;  // weights[l-1] is layer l, width(l) x width(l-1)
  std::vector<Eigen::VectorXd> biases;

  int layers() const { return int(weights.size()); }
};

struct PreactivationStack {
  Eigen::VectorXd input;                // z^(0) = x
  std::vector<Eigen::VectorXd> z;       // z[l-1] is the layer-l preactivation

  const Eigen::VectorXd& layer(int l) const { return l == 0 ? input : z[l - 1]; }
};

/// Draw a parameter set for the given scheme. Orthogonal uses the
/// semi-orthogonal sampler everywhere (square layers reduce to Haar);
/// mixed draws the first layer Gaussian and the rest orthogonal. Biases are
/// exactly zero when cb = 0.
ParameterSet init_network(const NetworkConfig& config, const SeedTree& seed);

PreactivationStack forward(const NetworkConfig& config, const ParameterSet& params,
                           const Eigen::VectorXd& x);

std::vector<PreactivationStack> forward_batch(const NetworkConfig& config,
                                              const ParameterSet& params,
                                              const std::vector<Eigen::VectorXd>& xs);

/// Flat binary container (magic "OEL1"): header then row-major little-endian
/// f64 weight matrices layer by layer, then biases.
void save_parameters(const std::string& path, const NetworkConfig& config,
                     const ParameterSet& params);
std::pair<NetworkConfig, ParameterSet> load_parameters(const std::string& path);

}  // namespace oel
