#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "oel/network.hpp"
#include "oel/sampling.hpp"

using namespace oel;

namespace {

NetworkConfig square_config(int n, int layers, ActKind act, InitKind init, double cw,
                            double cb = 0.0) {
  NetworkConfig c;
  c.n_in = c.n_hidden = c.n_out = n;
  c.layers = layers;
  c.act = act;
  c.init = {init, cw, cb};
  return c;
}

Eigen::VectorXd random_input(int n, std::uint64_t seed) {
  Rng rng = SeedTree(seed).child("x").stream();
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.next_double();
  return x;
}

}  // namespace

TEST_CASE("activation derivatives match finite differences (tanh)") {
  Activation act{ActKind::tanh};
  double h = 1e-5;
  for (int i = 0; i <= 100; ++i) {
    double z = -5.0 + 0.1 * i;
    double d1_fd = (act.f(z + h) - act.f(z - h)) / (2 * h);
    double d2_fd = (act.d1(z + h) - act.d1(z - h)) / (2 * h);
    double d3_fd = (act.d2(z + h) - act.d2(z - h)) / (2 * h);
    CHECK(act.d1(z) == doctest::Approx(d1_fd).epsilon(1e-6));
    CHECK(act.d2(z) == doctest::Approx(d2_fd).epsilon(1e-6).scale(1.0));
    CHECK(act.d3(z) == doctest::Approx(d3_fd).epsilon(1e-6).scale(1.0));
  }
  CHECK(act.f(0.0) == 0.0);
  CHECK(std::abs(act.f(2.0) - std::tanh(2.0)) < 1e-10);
}

TEST_CASE("activation conventions: linear and relu") {
  Activation lin{ActKind::linear}, relu{ActKind::relu};
  CHECK(lin.f(1.5) == 1.5);
  CHECK(lin.d1(-3.0) == 1.0);
  CHECK(lin.d2(2.0) == 0.0);
  CHECK(relu.f(-2.0) == 0.0);
  CHECK(relu.f(2.0) == 2.0);
  CHECK(relu.d1(0.0) == 0.0);  // fixed convention at the kink
  CHECK(relu.d1(1e-12) == 1.0);
  CHECK(relu.d2(1.0) == 0.0);
  CHECK(relu.d3(1.0) == 0.0);
}

TEST_CASE("init_network scheme shapes and gram identities") {
  NetworkConfig cfg;
  cfg.n_in = 784;
  cfg.n_hidden = 30;
  cfg.n_out = 10;
  cfg.layers = 4;
  cfg.act = ActKind::tanh;
  cfg.init = {InitKind::orthogonal, 1.0, 0.0};
  ParameterSet p = init_network(cfg, SeedTree(1));
  REQUIRE(p.layers() == 4);
  CHECK(p.weights[0].rows() == 30);
  CHECK(p.weights[0].cols() == 784);
  CHECK(p.weights[3].rows() == 10);
  // first layer: semi-orthogonal rows
  CHECK((p.weights[0] * p.weights[0].transpose() - Eigen::MatrixXd::Identity(30, 30))
            .cwiseAbs()
            .maxCoeff() < 1e-10);
  // hidden layers: full orthogonal
  CHECK((p.weights[1].transpose() * p.weights[1] - Eigen::MatrixXd::Identity(30, 30))
            .cwiseAbs()
            .maxCoeff() < 1e-10);
  for (const auto& b : p.biases) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mixed init: gaussian first layer, orthogonal deeper") {
  NetworkConfig cfg = square_config(40, 3, ActKind::linear, InitKind::mixed, 1.0);
  ParameterSet p = init_network(cfg, SeedTree(2));
  // deeper layers satisfy the gram identity
  CHECK((p.weights[1].transpose() * p.weights[1] - Eigen::MatrixXd::Identity(40, 40))
            .cwiseAbs()
            .maxCoeff() < 1e-10);
  // gaussian first layer: gram should NOT be the identity
  CHECK((p.weights[0].transpose() * p.weights[0] - Eigen::MatrixXd::Identity(40, 40))
            .cwiseAbs()
            .maxCoeff() > 1e-3);
  // and per-entry variance ~ CW/n over the matrix
  double var = p.weights[0].squaredNorm() / double(40 * 40);
  CHECK(var == doctest::Approx(1.0 / 40).epsilon(0.2));
}

TEST_CASE("norm preservation for linear orthogonal critical networks") {
  for (int depth : {1, 10, 50}) {
    NetworkConfig cfg = square_config(64, depth, ActKind::linear, InitKind::orthogonal, 1.0);
    ParameterSet p = init_network(cfg, SeedTree(100 + depth));
    Eigen::VectorXd x = random_input(64, 3);
    PreactivationStack st = forward(cfg, p, x);
    for (int l = 1; l <= depth; ++l)
      CHECK(st.z[l - 1].norm() == doctest::Approx(x.norm()).epsilon(1e-8));
  }
}

TEST_CASE("forward edge cases") {
  NetworkConfig cfg = square_config(5, 3, ActKind::tanh, InitKind::gaussian, 1.0);
  ParameterSet p = init_network(cfg, SeedTree(4));
  // zero input, zero biases -> all zero
  PreactivationStack st = forward(cfg, p, Eigen::VectorXd::Zero(5));
  for (const auto& z : st.z) CHECK(z.cwiseAbs().maxCoeff() == 0.0);
  // identity single layer: z = x
  NetworkConfig one = square_config(5, 1, ActKind::tanh, InitKind::gaussian, 1.0);
  ParameterSet ip;
  ip.weights.push_back(Eigen::MatrixXd::Identity(5, 5));
  ip.biases.push_back(Eigen::VectorXd::Zero(5));
  Eigen::VectorXd x = random_input(5, 5);
  CHECK((forward(one, ip, x).z[0] - x).cwiseAbs().maxCoeff() == 0.0);
  // dimension mismatch
  CHECK_THROWS_AS(forward(cfg, p, Eigen::VectorXd::Zero(4)), std::invalid_argument);
}

TEST_CASE("forward recurrence invariant holds") {
  NetworkConfig cfg = square_config(9, 4, ActKind::tanh, InitKind::gaussian, 1.3, 0.04);
  ParameterSet p = init_network(cfg, SeedTree(6));
  Eigen::VectorXd x = random_input(9, 7);
  PreactivationStack st = forward(cfg, p, x);
  Activation act{cfg.act};
  for (int l = 2; l <= 4; ++l) {
    Eigen::VectorXd a = st.z[l - 2];
    for (int i = 0; i < a.size(); ++i) a[i] = act.f(a[i]);
    Eigen::VectorXd expect = p.biases[l - 1] + p.weights[l - 1] * a;
    CHECK((st.z[l - 1] - expect).cwiseAbs().maxCoeff() < 1e-12 * expect.norm());
  }
}

TEST_CASE("forward_batch is pure and order independent") {
  NetworkConfig cfg = square_config(8, 3, ActKind::relu, InitKind::gaussian, 2.0);
  ParameterSet p = init_network(cfg, SeedTree(8));
  std::vector<Eigen::VectorXd> xs{random_input(8, 1), random_input(8, 2), random_input(8, 3)};
  auto batch = forward_batch(cfg, p, xs);
  REQUIRE(batch.size() == 3);
  for (int i = 0; i < 3; ++i) {
    PreactivationStack single = forward(cfg, p, xs[i]);
    for (int l = 0; l < 3; ++l)
      CHECK((batch[i].z[l] - single.z[l]).cwiseAbs().maxCoeff() == 0.0);
  }
  auto permuted = forward_batch(cfg, p, {xs[2], xs[0], xs[1]});
  CHECK((permuted[1].z[2] - batch[0].z[2]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kernel scale sanity for linear gaussian networks") {
  const int n = 50, depth = 4, nets = 4000;
  const double cw = 2.0;
  NetworkConfig cfg = square_config(n, depth, ActKind::linear, InitKind::gaussian, cw);
  Eigen::VectorXd x = random_input(n, 9);
  double k0 = x.squaredNorm() / n;
  std::vector<double> acc(depth, 0.0), acc2(depth, 0.0);
  SeedTree root(77);
  for (int k = 0; k < nets; ++k) {
    ParameterSet p = init_network(cfg, root.child("net", k));
    PreactivationStack st = forward(cfg, p, x);
    for (int l = 0; l < depth; ++l) {
      double v = st.z[l].squaredNorm() / n;
      acc[l] += v;
      acc2[l] += v * v;
    }
  }
  for (int l = 0; l < depth; ++l) {
    double mean = acc[l] / nets;
    double se = std::sqrt((acc2[l] / nets - mean * mean) / (nets - 1));
    CHECK(std::abs(mean - std::pow(cw, l + 1) * k0) < 3 * se);
  }
}

TEST_CASE("parameter container round trip is bit exact") {
  NetworkConfig cfg;
  cfg.n_in = 12;
  cfg.n_hidden = 7;
  cfg.n_out = 3;
  cfg.layers = 3;
  cfg.act = ActKind::relu;
  cfg.init = {InitKind::mixed, 1.7, 0.3};
  ParameterSet p = init_network(cfg, SeedTree(10));
  std::string path =
      (std::filesystem::temp_directory_path() / "oel_params_roundtrip.bin").string();
  save_parameters(path, cfg, p);
  auto [cfg2, p2] = load_parameters(path);
  CHECK(cfg2.n_in == cfg.n_in);
  CHECK(cfg2.n_hidden == cfg.n_hidden);
  CHECK(cfg2.n_out == cfg.n_out);
  CHECK(cfg2.layers == cfg.layers);
  CHECK(cfg2.act == cfg.act);
  CHECK(cfg2.init.kind == cfg.init.kind);
  CHECK(cfg2.init.cw == cfg.init.cw);
  for (int l = 0; l < 3; ++l) {
    CHECK((p.weights[l] - p2.weights[l]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((p.biases[l] - p2.biases[l]).cwiseAbs().maxCoeff() == 0.0);
  }
  std::remove(path.c_str());
}
