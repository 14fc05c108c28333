#include "oel/trainer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "oel/parallel.hpp"

namespace oel::train {

using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

inline ArrayXXd act_apply(ActKind kind, const MatrixXd& z) {
  switch (kind) {
    case ActKind::linear: return z.array();
    case ActKind::relu: return z.array().max(0.0);
    case ActKind::tanh: return 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
  }
  return z.array();
}

inline ArrayXXd act_deriv_from(ActKind kind, const MatrixXd& z, const ArrayXXd& a) {
  switch (kind) {
    case ActKind::linear: return ArrayXXd::Ones(z.rows(), z.cols());
    case ActKind::relu: return (z.array() > 0.0).cast<double>();
    case ActKind::tanh: return 1.0 - a.square();
  }
  return ArrayXXd::Ones(z.rows(), z.cols());
}

/// Forward + loss + output gradient on one batch. Activations are cached
/// for the backward pass.
struct BatchState {
  std::vector<MatrixXd> z;   // per layer
  std::vector<MatrixXd> a;   // activations, a[0] = input
};

void batch_forward(const NetworkConfig& cfg, const ParameterSet& p, const MatrixXd& x,
                   BatchState& st) {
  int layers = cfg.layers;
  st.z.resize(layers);
  st.a.resize(layers);  // a[l-1] = sigma(z_l) for l < layers
  const MatrixXd* prev = &x;
  for (int l = 1; l <= layers; ++l) {
    st.z[l - 1].noalias() = *prev * p.weights[l - 1].transpose();
    st.z[l - 1].rowwise() += p.biases[l - 1].transpose();
    if (l < layers) {
      st.a[l - 1] = act_apply(cfg.act, st.z[l - 1]).matrix();
      prev = &st.a[l - 1];
    }
  }
}

double loss_value(LossKind kind, const MatrixXd& out, const MatrixXd& y) {
  double b = double(out.rows());
  if (kind == LossKind::mse) return (out - y).squaredNorm() / b;
  // sigmoid outputs normalized to class probabilities
  ArrayXXd s = 1.0 / (1.0 + (-out.array()).exp());
  Eigen::ArrayXd row_sum = s.rowwise().sum();
  ArrayXXd logp = s.log();
  logp.colwise() -= row_sum.log();
  double acc = 0.0;
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j)
      if (y(i, j) > 0.5) acc -= logp(i, j);
  return acc / b;
}

MatrixXd loss_grad(LossKind kind, const MatrixXd& out, const MatrixXd& y) {
  double b = double(out.rows());
  if (kind == LossKind::mse) return 2.0 / b * (out - y);
  ArrayXXd s = 1.0 / (1.0 + (-out.array()).exp());
  ArrayXXd sp = s * (1.0 - s);
  Eigen::ArrayXd row_sum = s.rowwise().sum();
  ArrayXXd grad = sp;
  grad.colwise() /= row_sum;
  grad -= y.array() * (1.0 - s);
  return (grad / b).matrix();
}

struct Gradients {
  std::vector<MatrixXd> w;
  std::vector<VectorXd> b;
};

void backward(const NetworkConfig& cfg, const ParameterSet& p, const MatrixXd& x,
              const BatchState& st, const MatrixXd& gout, Gradients& g) {
  int layers = cfg.layers;
  g.w.resize(layers);
  g.b.resize(layers);
  MatrixXd delta = gout;
  for (int l = layers; l >= 1; --l) {
    const MatrixXd& below = l == 1 ? x : st.a[l - 2];
    g.w[l - 1].noalias() = delta.transpose() * below;
    g.b[l - 1] = delta.colwise().sum().transpose();
    if (l > 1) {
      MatrixXd back = delta * p.weights[l - 1];
      delta = (back.array() * act_deriv_from(cfg.act, st.z[l - 2], st.a[l - 2].array())).matrix();
    }
  }
}

struct AdamState {
  std::vector<MatrixXd> mw, vw;
  std::vector<VectorXd> mb, vb;
  long t = 0;
};

void apply_update(const NetworkConfig& cfg, const OptimizerSpec& opt, const Gradients& g,
                  ParameterSet& p, AdamState& adam) {
  int layers = cfg.layers;
  switch (opt.kind) {
    case OptimizerKind::scaled_gd:
      for (int l = 1; l <= layers; ++l) {
        double lw = opt.lr.lambda_w[l - 1] / double(cfg.width(l - 1));
        p.weights[l - 1].noalias() -= opt.eta * lw * g.w[l - 1];
        p.biases[l - 1].noalias() -= opt.eta * opt.lr.lambda_b[l - 1] * g.b[l - 1];
      }
      break;
    case OptimizerKind::plain_gd: {
      double rate = opt.eta / double(cfg.n_hidden);
      for (int l = 1; l <= layers; ++l) {
        p.weights[l - 1].noalias() -= rate * g.w[l - 1];
        p.biases[l - 1].noalias() -= rate * g.b[l - 1];
      }
      break;
    }
    case OptimizerKind::adam: {
      if (adam.t == 0) {
        adam.mw.resize(layers);
        adam.vw.resize(layers);
        adam.mb.resize(layers);
        adam.vb.resize(layers);
        for (int l = 0; l < layers; ++l) {
          adam.mw[l] = MatrixXd::Zero(g.w[l].rows(), g.w[l].cols());
          adam.vw[l] = MatrixXd::Zero(g.w[l].rows(), g.w[l].cols());
          adam.mb[l] = VectorXd::Zero(g.b[l].size());
          adam.vb[l] = VectorXd::Zero(g.b[l].size());
        }
      }
      ++adam.t;
      double b1 = opt.adam_beta1, b2 = opt.adam_beta2;
      double c1 = 1.0 - std::pow(b1, double(adam.t));
      double c2 = 1.0 - std::pow(b2, double(adam.t));
      for (int l = 0; l < layers; ++l) {
        adam.mw[l] = b1 * adam.mw[l] + (1 - b1) * g.w[l];
        adam.vw[l] = b2 * adam.vw[l].array().matrix() +
                     (1 - b2) * g.w[l].array().square().matrix();
        adam.mb[l] = b1 * adam.mb[l] + (1 - b1) * g.b[l];
        adam.vb[l] = b2 * adam.vb[l].array().matrix() +
                     (1 - b2) * g.b[l].array().square().matrix();
        p.weights[l].array() -=
            opt.eta * (adam.mw[l].array() / c1) / ((adam.vw[l].array() / c2).sqrt() + opt.adam_eps);
        p.biases[l].array() -=
            opt.eta * (adam.mb[l].array() / c1) / ((adam.vb[l].array() / c2).sqrt() + opt.adam_eps);
      }
      break;
    }
  }
}

}  // namespace

TrainRecord train_full_batch(const NetworkConfig& config, ParameterSet params,
                             const DataSplits& data, const OptimizerSpec& opt,
                             const LossSpec& loss, int epochs,
                             const std::optional<ntk::TrackingProbe>& track) {
  if (epochs < 1) throw std::invalid_argument("train_full_batch: epochs >= 1");
  if (data.x_train.rows() == 0 || data.x_val.rows() == 0)
    throw std::invalid_argument("train_full_batch: empty train or val split");
  ntk::LearningRateTensor probe_lr =
      opt.kind == OptimizerKind::scaled_gd && !opt.lr.lambda_b.empty()
          ? opt.lr
          : theory::lr_schedule_eq52(config.layers);

  TrainRecord rec;
  rec.best_params = params;
  BatchState st, val_st;
  Gradients g;
  AdamState adam;
  for (int e = 0; e < epochs; ++e) {
    if (track && e % track->cadence == 0) {
      rec.tracked_epochs.push_back(e);
      rec.tracked_values.push_back(ntk::eval_tracking_probe(config, params, probe_lr, *track));
    }
    batch_forward(config, params, data.x_train, st);
    const MatrixXd& out = st.z[config.layers - 1];
    double ltr = loss_value(loss.kind, out, data.y_train);
    batch_forward(config, params, data.x_val, val_st);
    double lval = loss_value(loss.kind, val_st.z[config.layers - 1], data.y_val);
    rec.train_loss.push_back(ltr);
    rec.val_loss.push_back(lval);
    rec.epochs_run = e + 1;
    if (!std::isfinite(ltr) || ltr > kDivergenceThreshold || !std::isfinite(lval)) {
      rec.diverged = true;
      break;
    }
    if (rec.best_epoch < 0 || lval < rec.best_val_loss) {
      rec.best_epoch = e;
      rec.best_val_loss = lval;
      rec.best_params = params;
    }
    MatrixXd gout = loss_grad(loss.kind, out, data.y_train);
    backward(config, params, data.x_train, st, gout, g);
    apply_update(config, opt, g, params, adam);
  }
  if (rec.best_epoch < 0) {
    // every epoch diverged; keep the initial snapshot but flag it
    rec.best_val_loss = std::numeric_limits<double>::infinity();
  }
  return rec;
}

EvalResult evaluate(const NetworkConfig& config, const ParameterSet& params,
                    const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const LossSpec& loss) {
  BatchState st;
  batch_forward(config, params, x, st);
  const MatrixXd& out = st.z[config.layers - 1];
  EvalResult r;
  r.loss = loss_value(loss.kind, out, y);
  int hits = 0;
  for (int i = 0; i < out.rows(); ++i) {
    Eigen::Index pred, truth;
    out.row(i).maxCoeff(&pred);
    y.row(i).maxCoeff(&truth);
    hits += pred == truth;
  }
  r.accuracy = out.rows() > 0 ? double(hits) / double(out.rows()) : 0.0;
  return r;
}

std::pair<int, const ParameterSet*> select_best(const TrainRecord& record) {
  if (record.val_loss.empty() || record.best_epoch < 0)
    throw std::runtime_error("select_best: no non-diverged epoch available");
  return {record.best_epoch, &record.best_params};
}

std::vector<GridCellResult> run_comparison_grid(const std::vector<GridCell>& cells, int seeds,
                                                const DataSplits& data, std::uint64_t master_seed,
                                                int workers) {
  struct Job {
    int cell;
    int seed;
  };
  std::vector<Job> jobs;
  for (int c = 0; c < int(cells.size()); ++c)
    for (int s = 0; s < seeds; ++s) jobs.push_back({c, s});
  std::vector<GridCellResult> results(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    results[c].label = cells[c].label;
    results[c].runs.resize(seeds);
  }
  SeedTree root(master_seed);
  parallel_for(int(jobs.size()), workers, [&](int j) {
    const Job& job = jobs[j];
    const GridCell& cell = cells[job.cell];
    SeedTree node = root.child("grid", std::uint64_t(job.cell)).child("seed",
                                                                      std::uint64_t(job.seed));
    ParameterSet params = init_network(cell.config, node);
    TrainRecord rec =
        train_full_batch(cell.config, std::move(params), data, cell.opt, cell.loss, cell.epochs);
    GridRun run;
    run.seed_index = job.seed;
    run.diverged = rec.diverged;
    run.best_epoch = rec.best_epoch;
    run.best_val_loss = rec.best_val_loss;
    if (rec.best_epoch >= 0 && data.x_test.rows() > 0)
      run.best_test_loss =
          evaluate(cell.config, rec.best_params, data.x_test, data.y_test, cell.loss).loss;
    results[job.cell].runs[job.seed] = run;
  });
  for (auto& r : results) {
    std::vector<double> tests;
    for (const auto& run : r.runs)
      if (run.best_epoch >= 0) tests.push_back(run.best_test_loss);
    if (!tests.empty()) {
      double mean = 0;
      for (double t : tests) mean += t;
      mean /= double(tests.size());
      double ss = 0;
      for (double t : tests) ss += (t - mean) * (t - mean);
      r.mean_best_test = mean;
      r.std_best_test = tests.size() > 1 ? std::sqrt(ss / double(tests.size() - 1)) : 0.0;
    }
  }
  return results;
}

}  // namespace oel::train
