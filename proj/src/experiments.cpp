#include "oel/experiments.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "oel/common.hpp"
#include "oel/dataset.hpp"
#include "oel/ensemble.hpp"
#include "oel/ntk.hpp"
#include "oel/parallel.hpp"
#include "oel/theory.hpp"
#include "oel/trainer.hpp"
#include "oel/weingarten.hpp"

namespace oel::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCommonKeys[] = {"experiment", "master_seed", "runtime.workers", "out.dir"};

std::set<std::string> with_common(std::set<std::string> keys) {
  for (const char* k : kCommonKeys) keys.insert(k);
  return keys;
}

void write_metadata(const fs::path& out, const Config& cfg, std::uint64_t seed) {
  fs::create_directories(out);
  std::ofstream(out / "config.txt") << cfg.resolved_text();
  json meta;
  meta["version"] = version();
  meta["master_seed"] = seed;
  meta["config"] = json::object();
  for (const auto& [k, v] : cfg.values()) meta["config"][k] = v;
  std::ofstream(out / "metadata.json") << meta.dump(2) << "\n";
}

theory::LrSchedule schedule_from_config(const Config& cfg, int layers) {
  std::string name = cfg.get_string("lr.schedule", "eq52");
  if (name == "eq52") return theory::lr_schedule_eq52(layers);
  if (name == "one_over_depth") return theory::lr_schedule_one_over_depth(layers);
  if (name == "uniform")
    return theory::lr_schedule_uniform(layers, cfg.get_double("lr.lambda_b", 1.0),
                                       cfg.get_double("lr.lambda_w", 1.0));
  throw std::runtime_error("unknown lr.schedule: " + name);
}

InitScheme init_scheme_from(const Config& cfg, ActKind act, const std::string& init_name) {
  theory::CriticalTuning crit = theory::critical_tuning(act);
  InitScheme scheme;
  scheme.kind = init_from_string(init_name);
  scheme.cw = cfg.get_double("network.cw", crit.cw);
  scheme.cb = cfg.get_double("network.cb", crit.cb);
  return scheme;
}

// ---- weingarten-check ---------------------------------------------------

int run_weingarten_check(const Config& cfg, const fs::path& out, int workers) {
  cfg.validate_keys(with_common({"check.ns", "check.samples"}));
  std::vector<std::string> ns = cfg.has("check.ns") ? cfg.get_list("check.ns")
                                                    : std::vector<std::string>{"3", "4", "8"};
  long samples = cfg.get_int("check.samples", 1000000);
  std::uint64_t seed = cfg.get_u64("master_seed", 1);
  std::ofstream csv(out / "weingarten.csv");
  csv << "n,pattern,mc_estimate,mc_stderr,exact\n";
  bool ok = true;
  for (const auto& ns_str : ns) {
    int n = std::stoi(ns_str);
    WeingartenPair wp = weingarten_pair(n);
    Rng s1 = SeedTree(seed).child("w11", n).stream();
    Rng s2 = SeedTree(seed).child("w2", n).stream();
    auto [m11, e11] = monte_carlo_orthogonal_moment(
        n, 1.0, {{1, 1}, {1, 1}, {2, 2}, {2, 2}}, samples, s1);
    auto [m2, e2] = monte_carlo_orthogonal_moment(
        n, 1.0, {{1, 1}, {1, 2}, {2, 1}, {2, 2}}, samples, s2);
    csv << n << ",w11," << m11 << "," << e11 << "," << wp.w11.value() << "\n";
    csv << n << ",w2," << m2 << "," << e2 << "," << wp.w2.value() << "\n";
    ok = ok && std::abs(m11 - wp.w11.value()) < 3 * e11 && std::abs(m2 - wp.w2.value()) < 3 * e2;
  }
  (void)workers;
  std::cout << (ok ? "weingarten-check: all moments within 3 sigma\n"
                   : "weingarten-check: MISMATCH beyond 3 sigma\n");
  return ok ? 0 : 1;
}

// ---- correlators ----------------------------------------------------------

int run_correlators(const Config& cfg, const fs::path& out, int workers) {
  cfg.validate_keys(with_common({"network.width", "network.depth", "network.activations",
                                 "network.inits", "network.cw", "network.cb",
                                 "ensemble.num_networks", "ensemble.num_inputs"}));
  int n = int(cfg.get_int("network.width", 100));
  int depth = int(cfg.get_int("network.depth", 10));
  int nets = int(cfg.get_int("ensemble.num_networks", 1000));
  int ninputs = int(cfg.get_int("ensemble.num_inputs", 1));
  std::uint64_t seed = cfg.get_u64("master_seed", 1);
  auto acts = cfg.has("network.activations") ? cfg.get_list("network.activations")
                                             : std::vector<std::string>{"linear", "relu", "tanh"};
  auto inits = cfg.has("network.inits") ? cfg.get_list("network.inits")
                                        : std::vector<std::string>{"gaussian", "orthogonal"};

  std::ofstream csv(out / "correlators.csv");
  csv << "correlator,layer,estimate,stderr,normalization,n,L,activation,init,num_networks,seed\n";
  auto inputs = data::random_inputs(n, ninputs, seed);
  for (const auto& act_name : acts) {
    for (const auto& init_name : inits) {
      ActKind act = act_from_string(act_name);
      ens::EnsembleSpec spec;
      spec.config.n_in = spec.config.n_hidden = spec.config.n_out = n;
      spec.config.layers = depth;
      spec.config.act = act;
      spec.config.init = init_scheme_from(cfg, act, init_name);
      spec.num_networks = nets;
      spec.inputs = inputs;
      spec.master_seed = SeedTree(seed).child(act_name + "/" + init_name).state();
      ens::EnsembleRun run(spec, workers);
      auto emit = [&](const std::string& name, const std::string& norm, int layer,
                      const stats::Estimate& e) {
        csv << name << "," << layer << "," << e.value << "," << e.stderr_ << "," << norm << ","
            << n << "," << depth << "," << act_name << "," << init_name << "," << nets << ","
            << seed << "\n";
      };
      for (int l = 1; l <= depth; ++l) {
        stats::Estimate k = ens::measure_kernel(run, 0, 0, l);
        stats::Estimate v = ens::measure_vertex_single(run, 0, l);
        emit("kernel", "none", l, k);
        emit("vertex", "none", l, v);
        emit("vertex_norm", "K2", l,
             {v.value / (k.value * k.value), v.stderr_ / (k.value * k.value)});
        if (ninputs >= 2) {
          stats::Estimate v22 = ens::measure_vertex_multi(run, {0, 0, 1, 1}, l);
          emit("vertex_22", "none", l, v22);
        }
        if (ninputs >= 4) {
          stats::Estimate v4 = ens::measure_vertex_multi(run, {0, 1, 2, 3}, l);
          emit("vertex_4", "none", l, v4);
        }
      }
    }
  }
  return 0;
}

// ---- ntk-stats ------------------------------------------------------------

int run_ntk_stats(const Config& cfg, const fs::path& out, int workers) {
  cfg.validate_keys(with_common({"network.width", "network.depth", "network.activation",
                                 "network.inits", "network.cw", "network.cb",
                                 "ensemble.num_networks", "lr.schedule", "lr.lambda_b",
                                 "lr.lambda_w", "ntk.with_dntk", "ntk.with_ddntk",
                                 "runtime.memory_mb"}));
  int n = int(cfg.get_int("network.width", 50));
  int depth = int(cfg.get_int("network.depth", 10));
  int nets = int(cfg.get_int("ensemble.num_networks", 100));
  std::uint64_t seed = cfg.get_u64("master_seed", 1);
  std::string act_name = cfg.get_string("network.activation", "tanh");
  ActKind act = act_from_string(act_name);
  auto inits = cfg.has("network.inits") ? cfg.get_list("network.inits")
                                        : std::vector<std::string>{"gaussian", "orthogonal"};
  std::string sched_name = cfg.get_string("lr.schedule", "eq52");

  std::ofstream csv(out / "ntk_correlators.csv");
  csv << "correlator,layer,estimate,stderr,n,L,init,lr_schedule,seed\n";
  auto input = data::random_inputs(n, 1, seed)[0];
  for (const auto& init_name : inits) {
    ntk::NtkEnsembleSpec spec;
    spec.config.n_in = spec.config.n_hidden = spec.config.n_out = n;
    spec.config.layers = depth;
    spec.config.act = act;
    spec.config.init = init_scheme_from(cfg, act, init_name);
    spec.num_networks = nets;
    spec.input = input;
    spec.lr = schedule_from_config(cfg, depth);
    spec.master_seed = SeedTree(seed).child(init_name).state();
    spec.with_dntk = cfg.get_bool("ntk.with_dntk", true);
    spec.with_ddntk = cfg.get_bool("ntk.with_ddntk", true);
    spec.workers = workers;
    spec.memory_budget_bytes = std::size_t(cfg.get_int("runtime.memory_mb", 2048)) << 20;
    ntk::NtkCorrelatorTable table = ntk::measure_ntk_correlators(spec);
    for (const auto& [name, series] : table.series)
      for (int l = 0; l < table.layers; ++l)
        csv << name << "," << l + 1 << "," << series[l].value << "," << series[l].stderr_ << ","
            << n << "," << depth << "," << init_name << "," << sched_name << "," << seed << "\n";
  }
  return 0;
}

// ---- theory ---------------------------------------------------------------

int run_theory(const Config& cfg, const fs::path& out, int) {
  cfg.validate_keys(with_common({"theory.activation", "theory.scheme", "theory.cw", "theory.cb",
                                 "theory.k0", "theory.depth", "lr.schedule", "lr.lambda_b",
                                 "lr.lambda_w", "theory.nodes"}));
  std::string act_name = cfg.get_string("theory.activation", "tanh");
  ActKind act = act_from_string(act_name);
  theory::CriticalTuning crit = theory::critical_tuning(act);
  theory::Tuning tuning{cfg.get_double("theory.cb", crit.cb), cfg.get_double("theory.cw", crit.cw)};
  std::string scheme_name = cfg.get_string("theory.scheme", "orthogonal");
  theory::WeightScheme scheme = scheme_name == "gaussian" ? theory::WeightScheme::gaussian
                                                          : theory::WeightScheme::orthogonal;
  double k0 = cfg.get_double("theory.k0", 1.0 / 3.0);
  int depth = int(cfg.get_int("theory.depth", 100));
  int nodes = int(cfg.get_int("theory.nodes", theory::kDefaultNodes));

  std::vector<double> kser = theory::kernel_recursion(tuning, k0, act, depth, nodes);
  double v1 = theory::vertex_initial_condition(
      scheme_name == "mixed" ? theory::WeightScheme::gaussian : scheme, kser[1]);
  std::vector<double> kser_layers(kser.begin() + 1, kser.end());  // layer 1..depth
  std::vector<double> vser =
      theory::vertex_recursion_single(scheme, act, tuning, kser_layers, v1, nodes);
  std::vector<double> gser = theory::nlo_metric_recursion(kser_layers, vser);
  theory::LrSchedule lr = schedule_from_config(cfg, depth);
  std::vector<double> theta = theory::frozen_ntk_recursion(tuning, lr, kser, act, nodes);

  std::ofstream csv(out / "theory.csv");
  csv << "layer,K,chi_par,chi_perp,V,V_norm,G1,Theta,activation,scheme,CW,Cb,K0,lr_schedule\n";
  for (int l = 1; l <= depth; ++l) {
    double k = kser_layers[l - 1];
    theory::Susceptibilities chi = theory::susceptibilities(k, tuning.cw, act, nodes);
    double v = vser[l - 1];
    csv << l << "," << k << "," << chi.par << "," << chi.perp << "," << v << ","
        << (k > 0 ? v / (k * k) : 0.0) << "," << gser[l - 1] << "," << theta[l - 1] << ","
        << act_name << "," << scheme_name << "," << tuning.cw << "," << tuning.cb << "," << k0
        << "," << cfg.get_string("lr.schedule", "eq52") << "\n";
  }
  return 0;
}

// ---- train / grid ---------------------------------------------------------

struct BuiltData {
  data::Dataset ds;
  train::DataSplits splits;
};

BuiltData build_data(const Config& cfg, std::uint64_t seed) {
  BuiltData b;
  int train_size = int(cfg.get_int("data.train_size", 5000));
  int val_size = int(cfg.get_int("data.val_size", 1000));
  if (cfg.get_bool("data.synthetic", false)) {
    int count = int(cfg.get_int("data.synth_count", train_size + val_size + 2000));
    b.ds = data::synthetic_mnist_like(count, SeedTree(seed).child("synthdata").state());
  } else {
    b.ds = data::load_mnist_idx(cfg.get_string("data.images"), cfg.get_string("data.labels"));
  }
  data::split_and_subsample(b.ds, train_size, val_size, seed);
  data::standardize(b.ds, data::Split::train);
  auto fill = [&](data::Split s, Eigen::MatrixXd& x, Eigen::MatrixXd& y, int cap) {
    std::vector<int> idx = b.ds.indices(s);
    if (cap > 0 && int(idx.size()) > cap) idx.resize(cap);
    x.resize(idx.size(), b.ds.dim());
    y.resize(idx.size(), b.ds.classes());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      x.row(i) = b.ds.inputs.row(idx[i]);
      y.row(i) = b.ds.labels.row(idx[i]);
    }
  };
  fill(data::Split::train, b.splits.x_train, b.splits.y_train, 0);
  fill(data::Split::val, b.splits.x_val, b.splits.y_val, 0);
  fill(data::Split::test, b.splits.x_test, b.splits.y_test,
       int(cfg.get_int("data.test_cap", 2000)));
  return b;
}

std::set<std::string> train_keys() {
  return with_common({"network.width", "network.depth", "network.activation", "network.init",
                      "network.cw", "network.cb", "data.synthetic", "data.synth_count",
                      "data.images", "data.labels", "data.train_size", "data.val_size",
                      "data.test_cap", "train.epochs", "train.eta", "train.optimizer",
                      "train.loss", "lr.schedule", "lr.lambda_b", "lr.lambda_w", "track.enable",
                      "track.mode", "track.class", "track.cadence", "train.seed_index"});
}

NetworkConfig net_from_config(const Config& cfg, int input_dim, int classes) {
  std::string act_name = cfg.get_string("network.activation", "tanh");
  ActKind act = act_from_string(act_name);
  NetworkConfig net;
  net.n_in = input_dim;
  net.n_hidden = int(cfg.get_int("network.width", 30));
  net.n_out = classes;
  net.layers = int(cfg.get_int("network.depth", 5)) + 1;  // hidden depth + output layer
  net.act = act;
  net.init = init_scheme_from(cfg, act, cfg.get_string("network.init", "orthogonal"));
  return net;
}

train::OptimizerSpec opt_from_config(const Config& cfg, int layers) {
  train::OptimizerSpec opt;
  std::string kind = cfg.get_string("train.optimizer", "scaled_gd");
  if (kind == "scaled_gd") opt.kind = train::OptimizerKind::scaled_gd;
  else if (kind == "plain_gd") opt.kind = train::OptimizerKind::plain_gd;
  else if (kind == "adam") opt.kind = train::OptimizerKind::adam;
  else throw std::runtime_error("unknown train.optimizer: " + kind);
  opt.eta = cfg.get_double("train.eta", opt.kind == train::OptimizerKind::adam ? 1e-3 : 10.0);
  opt.lr = schedule_from_config(cfg, layers);
  return opt;
}

train::LossSpec loss_from_config(const Config& cfg) {
  std::string kind = cfg.get_string("train.loss", "mse");
  if (kind == "mse") return {train::LossKind::mse};
  if (kind == "cross_entropy" || kind == "cross_entropy_sigmoid")
    return {train::LossKind::cross_entropy_sigmoid};
  throw std::runtime_error("unknown train.loss: " + kind);
}

std::optional<ntk::TrackingProbe> probe_from_config(const Config& cfg, const BuiltData& data,
                                                    std::uint64_t seed) {
  if (!cfg.get_bool("track.enable", false)) return std::nullopt;
  ntk::TrackingProbe probe;
  int cls = int(cfg.get_int("track.class", 6));
  probe.cadence = int(cfg.get_int("track.cadence", 100));
  probe.node = cls;
  std::string mode = cfg.get_string("track.mode", "diag_cross_sample");
  std::vector<int> train_members, val_members;
  for (int i = 0; i < data.ds.size(); ++i) {
    if (data.ds.raw_labels[i] != cls) continue;
    if (data.ds.split[i] == data::Split::train) train_members.push_back(i);
    else if (data.ds.split[i] == data::Split::val) val_members.push_back(i);
  }
  if (train_members.empty() || val_members.empty())
    throw std::runtime_error("tracking probe: class " + std::to_string(cls) + " has no members");
  Rng rng = SeedTree(seed).child("probe").stream();
  if (mode == "diag_cross_sample") {
    probe.mode = ntk::TrackingProbe::Mode::diag_cross_sample;
    int pick = val_members[rng.next_u64() % val_members.size()];
    probe.probe_input = data.ds.inputs.row(pick).transpose();
    for (int i : train_members) probe.class_inputs.push_back(data.ds.inputs.row(i).transpose());
  } else if (mode == "cross_neural") {
    probe.mode = ntk::TrackingProbe::Mode::cross_neural_single_sample;
    int pick = train_members[rng.next_u64() % train_members.size()];
    probe.probe_input = data.ds.inputs.row(pick).transpose();
  } else {
    throw std::runtime_error("unknown track.mode: " + mode);
  }
  return probe;
}

int run_train(const Config& cfg, const fs::path& out, int) {
  cfg.validate_keys(train_keys());
  std::uint64_t seed = cfg.get_u64("master_seed", 1);
  BuiltData data = build_data(cfg, seed);
  NetworkConfig net = net_from_config(cfg, data.ds.dim(), data.ds.classes());
  train::OptimizerSpec opt = opt_from_config(cfg, net.layers);
  train::LossSpec loss = loss_from_config(cfg);
  int epochs = int(cfg.get_int("train.epochs", 1000));
  long seed_index = cfg.get_int("train.seed_index", 0);
  std::optional<ntk::TrackingProbe> probe = probe_from_config(cfg, data, seed);

  ParameterSet params =
      init_network(net, SeedTree(seed).child("train").child("seed", std::uint64_t(seed_index)));
  train::TrainRecord rec =
      train::train_full_batch(net, std::move(params), data.splits, opt, loss, epochs, probe);

  std::ofstream csv(out / "train_record.csv");
  csv << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < rec.train_loss.size(); ++e)
    csv << e << "," << rec.train_loss[e] << "," << rec.val_loss[e] << "\n";
  if (!rec.tracked_epochs.empty()) {
    std::ofstream tcsv(out / "tracked_ntk.csv");
    tcsv << "epoch,value\n";
    for (std::size_t i = 0; i < rec.tracked_epochs.size(); ++i)
      tcsv << rec.tracked_epochs[i] << "," << rec.tracked_values[i] << "\n";
  }
  json summary;
  summary["best_epoch"] = rec.best_epoch;
  summary["best_val_loss"] = rec.best_val_loss;
  summary["diverged"] = rec.diverged;
  summary["epochs_run"] = rec.epochs_run;
  summary["seed"] = seed;
  summary["seed_index"] = seed_index;
  if (rec.best_epoch >= 0 && data.splits.x_test.rows() > 0) {
    train::EvalResult ev =
        train::evaluate(net, rec.best_params, data.splits.x_test, data.splits.y_test, loss);
    summary["best_test_loss"] = ev.loss;
    summary["best_test_accuracy"] = ev.accuracy;
  }
  std::ofstream(out / "summary.json") << summary.dump(2) << "\n";
  return rec.diverged ? 2 : 0;
}

int run_grid(const Config& cfg, const fs::path& out, int workers) {
  auto keys = train_keys();
  keys.insert("grid.depths");
  keys.insert("grid.inits");
  keys.insert("grid.seeds");
  cfg.validate_keys(keys);
  std::uint64_t seed = cfg.get_u64("master_seed", 1);
  BuiltData data = build_data(cfg, seed);
  int seeds = int(cfg.get_int("grid.seeds", 5));
  auto depths = cfg.has("grid.depths") ? cfg.get_list("grid.depths")
                                       : std::vector<std::string>{"5", "30"};
  auto inits = cfg.has("grid.inits") ? cfg.get_list("grid.inits")
                                     : std::vector<std::string>{"gaussian", "orthogonal"};
  std::vector<train::GridCell> cells;
  for (const auto& d : depths)
    for (const auto& init : inits) {
      Config cell_cfg = cfg;
      cell_cfg.set("network.depth", d);
      cell_cfg.set("network.init", init);
      train::GridCell cell;
      cell.label = "depth" + d + "_" + init;
      cell.config = net_from_config(cell_cfg, data.ds.dim(), data.ds.classes());
      cell.opt = opt_from_config(cell_cfg, cell.config.layers);
      cell.loss = loss_from_config(cell_cfg);
      cell.epochs = int(cfg.get_int("train.epochs", 1000));
      cells.push_back(std::move(cell));
    }
  auto results = train::run_comparison_grid(cells, seeds, data.splits, seed, workers);
  std::ofstream csv(out / "grid_summary.csv");
  csv << "cell,mean_best_test,std_best_test,seeds,diverged_runs\n";
  json detail = json::array();
  for (const auto& r : results) {
    int diverged = 0;
    json runs = json::array();
    for (const auto& run : r.runs) {
      diverged += run.diverged;
      runs.push_back({{"seed_index", run.seed_index},
                      {"best_val_loss", run.best_val_loss},
                      {"best_test_loss", run.best_test_loss},
                      {"best_epoch", run.best_epoch},
                      {"diverged", run.diverged}});
    }
    csv << r.label << "," << r.mean_best_test << "," << r.std_best_test << "," << seeds << ","
        << diverged << "\n";
    detail.push_back({{"cell", r.label}, {"runs", runs}});
  }
  std::ofstream(out / "grid_detail.json") << detail.dump(2) << "\n";
  return 0;
}

}  // namespace

int run_experiment(Config cfg, const std::string& out_dir, bool dry_run, int workers) {
  const char* env_seed = std::getenv("OEL_SEED");
  if (env_seed != nullptr) cfg.set("master_seed", env_seed);
  std::string kind = cfg.get_string("experiment");
  fs::path out = out_dir.empty() ? fs::path("out") / kind : fs::path(out_dir);
  if (dry_run) {
    std::cout << "experiment: " << kind << "\n" << cfg.resolved_text();
    return 0;
  }
  write_metadata(out, cfg, cfg.get_u64("master_seed", 1));
  if (workers <= 0) workers = int(cfg.get_int("runtime.workers", default_workers()));
  if (kind == "weingarten-check") return run_weingarten_check(cfg, out, workers);
  if (kind == "correlators") return run_correlators(cfg, out, workers);
  if (kind == "ntk-stats") return run_ntk_stats(cfg, out, workers);
  if (kind == "theory") return run_theory(cfg, out, workers);
  if (kind == "train") return run_train(cfg, out, workers);
  if (kind == "grid") return run_grid(cfg, out, workers);
  throw std::runtime_error("unknown experiment: " + kind);
}

}  // namespace oel::cli
