#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oel/network.hpp"
#include "oel/ntk.hpp"

namespace oel::train {

enum class OptimizerKind { scaled_gd, plain_gd, adam };
enum class LossKind { mse, cross_entropy_sigmoid };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::scaled_gd;
  double eta = 10.0;
  ntk::LearningRateTensor lr;  // scaled_gd only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct LossSpec {
  LossKind kind = LossKind::mse;
};

struct DataSplits {
  Eigen::MatrixXd x_train, y_train;
  Eigen::MatrixXd x_val, y_val;
  Eigen::MatrixXd x_test, y_test;  // may be empty
};

struct TrainRecord {
  std::vector<double> train_loss;  // per epoch, starting after the first step
  std::vector<double> val_loss;
  std::vector<int> tracked_epochs;
  std::vector<double> tracked_values;
  int best_epoch = -1;             // 0-based index into the loss series
  double best_val_loss = 0.0;
  ParameterSet best_params;
  bool diverged = false;
  int epochs_run = 0;
};

constexpr double kDivergenceThreshold = 1e6;

/// Full-batch training: the gradient of the batch-averaged loss over the
/// whole training split each epoch. Early-stopping bookkeeping (best
/// validation epoch and snapshot) is maintained while training continues to
/// the epoch budget; a non-finite or > 1e6 loss sets the divergence flag and
/// halts.
TrainRecord train_full_batch(const NetworkConfig& config, ParameterSet params,
                             const DataSplits& data, const OptimizerSpec& opt,
                             const LossSpec& loss, int epochs,
                             const std::optional<ntk::TrackingProbe>& track = std::nullopt);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};
EvalResult evaluate(const NetworkConfig& config, const ParameterSet& params,
                    const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const LossSpec& loss);

/// Best-validation selection: argmin of the validation series, earliest
/// epoch on ties.
std::pair<int, const ParameterSet*> select_best(const TrainRecord& record);

struct GridCell {
  std::string label;
  NetworkConfig config;
  OptimizerSpec opt;
  LossSpec loss;
  int epochs = 1;
};

struct GridRun {
  int seed_index = 0;
  double best_val_loss = 0.0;
  double best_test_loss = 0.0;
  int best_epoch = -1;
  bool diverged = false;
};

struct GridCellResult {
  std::string label;
  double mean_best_test = 0.0;
  double std_best_test = 0.0;
  std::vector<GridRun> runs;
};

/// Seeded repeats of each cell; per-cell mean and standard deviation of the
/// best-epoch test loss. Runs are independent and execute concurrently.
std::vector<GridCellResult> run_comparison_grid(const std::vector<GridCell>& cells, int seeds,
                                                const DataSplits& data, std::uint64_t master_seed,
                                                int workers = 1);

}  // namespace oel::train
