#include "oel/ensemble.hpp"

#include <cmath>
#include <stdexcept>

#include "oel/parallel.hpp"

namespace oel::ens {

EnsembleRun::EnsembleRun(const EnsembleSpec& spec, int workers) : spec_(spec) {
  if (spec.num_networks < 2) throw std::invalid_argument("ensemble needs >= 2 networks");
  if (spec.inputs.empty()) throw std::invalid_argument("ensemble needs at least one input");
  for (const auto& x : spec.inputs)
    if (x.size() != spec.config.n_in) throw std::invalid_argument("input width mismatch");
  spec_.config.validate();

  int ninputs = int(spec.inputs.size());
  int layers = spec.config.layers;
  store_.resize(ninputs);
  for (int a = 0; a < ninputs; ++a) {
    store_[a].resize(layers);
    for (int l = 1; l <= layers; ++l)
      store_[a][l - 1].resize(spec.num_networks, spec.config.width(l));
  }
  SeedTree root(spec.master_seed);
  parallel_for(spec.num_networks, workers, [&](int k) {
    ParameterSet params = init_network(spec_.config, root.child("net", std::uint64_t(k)));
    for (int a = 0; a < ninputs; ++a) {
      PreactivationStack st = forward(spec_.config, params, spec_.inputs[a]);
      for (int l = 1; l <= layers; ++l) store_[a][l - 1].row(k) = st.z[l - 1].transpose();
    }
  });
}

const Eigen::MatrixXd& EnsembleRun::z(int input, int layer) const {
  return store_.at(input).at(layer - 1);
}

namespace {

/// Streaming delete-one jackknife: gen(k) materializes member k's feature
/// vector, fn maps the feature mean to the statistic. Returns the
/// bias-corrected jackknife estimate (cancels the O(1/N) plug-in bias).
stats::Estimate jackknife_stream(int n, const std::function<Eigen::VectorXd(int)>& gen,
                                 const std::function<double(const Eigen::VectorXd&)>& fn) {
  Eigen::VectorXd sum = gen(0);
  for (int k = 1; k < n; ++k) sum += gen(k);
  double value = fn(sum / double(n));
  double mean_loo = 0.0, ss = 0.0;
  std::vector<double> loo(n);
  for (int k = 0; k < n; ++k) {
    loo[k] = fn((sum - gen(k)) / double(n - 1));
    mean_loo += loo[k];
  }
  mean_loo /= double(n);
  for (int k = 0; k < n; ++k) ss += (loo[k] - mean_loo) * (loo[k] - mean_loo);
  return {double(n) * value - (double(n) - 1.0) * mean_loo,
          std::sqrt((double(n) - 1.0) / double(n) * ss)};
}

}  // namespace

stats::Estimate measure_kernel(const EnsembleRun& run, int a, int b, int layer) {
  const Eigen::MatrixXd& za = run.z(a, layer);
  const Eigen::MatrixXd& zb = run.z(b, layer);
  int n = int(za.cols());
  std::vector<double> per_net(run.num_networks());
  for (int k = 0; k < run.num_networks(); ++k) per_net[k] = za.row(k).dot(zb.row(k)) / double(n);
  return stats::mean_and_stderr(per_net);
}

stats::Estimate measure_vertex_single(const EnsembleRun& run, int a, int layer) {
  const Eigen::MatrixXd& z = run.z(a, layer);
  int n = int(z.cols());
  if (n < 2) throw std::invalid_argument("vertex estimator needs >= 2 neurons");
  int nets = run.num_networks();
  double pairs = double(n) * (n - 1);
  // feature = [ s22 ; u (n) ; vec(z z^T) (n^2) ], u = z o z
  auto gen = [&](int k) {
    Eigen::VectorXd f(1 + n + n * n);
    Eigen::VectorXd zk = z.row(k).transpose();
    Eigen::VectorXd u = zk.array().square().matrix();
    double s2 = u.sum();
    f[0] = s2 * s2 - u.array().square().sum();  // sum_{i!=j} z_i^2 z_j^2
    f.segment(1, n) = u;
    Eigen::Map<Eigen::MatrixXd>(f.data() + 1 + n, n, n) = zk * zk.transpose();
    return f;
  };
  auto fn = [&](const Eigen::VectorXd& m) {
    double t1 = m[0] / pairs;
    Eigen::Map<const Eigen::VectorXd> u(m.data() + 1, n);
    Eigen::Map<const Eigen::MatrixXd> m2(m.data() + 1 + n, n, n);
    double su = u.sum();
    double t2 = (su * su - u.array().square().sum()) / pairs;
    double t3 = (m2.array().square().sum() - m2.diagonal().array().square().sum()) / pairs;
    return double(n) * (t1 - t2 - 2.0 * t3);
  };
  return jackknife_stream(nets, gen, fn);
}

stats::Estimate measure_vertex_multi(const EnsembleRun& run, const std::array<int, 4>& s,
                                     int layer) {
  const Eigen::MatrixXd& z1 = run.z(s[0], layer);
  const Eigen::MatrixXd& z2 = run.z(s[1], layer);
  const Eigen::MatrixXd& z3 = run.z(s[2], layer);
  const Eigen::MatrixXd& z4 = run.z(s[3], layer);
  int n = int(z1.cols());
  if (n < 2) throw std::invalid_argument("vertex estimator needs >= 2 neurons");
  double pairs = double(n) * (n - 1);
  // feature = [ s_uv ; u ; v ; vec(M13) ; vec(M24) ; vec(M14) ; vec(M23) ]
  int nn = n * n;
  auto gen = [&](int k) {
    Eigen::VectorXd a1 = z1.row(k), a2 = z2.row(k), a3 = z3.row(k), a4 = z4.row(k);
    Eigen::VectorXd u = (a1.array() * a2.array()).matrix();
    Eigen::VectorXd v = (a3.array() * a4.array()).matrix();
    Eigen::VectorXd f(1 + 2 * n + 4 * nn);
    f[0] = u.sum() * v.sum() - u.dot(v);
    f.segment(1, n) = u;
    f.segment(1 + n, n) = v;
    double* p = f.data() + 1 + 2 * n;
    Eigen::Map<Eigen::MatrixXd>(p, n, n) = a1 * a3.transpose();
    Eigen::Map<Eigen::MatrixXd>(p + nn, n, n) = a2 * a4.transpose();
    Eigen::Map<Eigen::MatrixXd>(p + 2 * nn, n, n) = a1 * a4.transpose();
    Eigen::Map<Eigen::MatrixXd>(p + 3 * nn, n, n) = a2 * a3.transpose();
    return f;
  };
  auto fn = [&](const Eigen::VectorXd& m) {
    double t1 = m[0] / pairs;
    Eigen::Map<const Eigen::VectorXd> u(m.data() + 1, n);
    Eigen::Map<const Eigen::VectorXd> v(m.data() + 1 + n, n);
    const double* p = m.data() + 1 + 2 * n;
    Eigen::Map<const Eigen::MatrixXd> m13(p, n, n), m24(p + nn, n, n), m14(p + 2 * nn, n, n),
        m23(p + 3 * nn, n, n);
    double wick_a = (u.sum() * v.sum() - u.dot(v)) / pairs;
    double wick_b = ((m13.array() * m24.array()).sum() -
                     (m13.diagonal().array() * m24.diagonal().array()).sum()) /
                    pairs;
    double wick_c = ((m14.array() * m23.array()).sum() -
                     (m14.diagonal().array() * m23.diagonal().array()).sum()) /
                    pairs;
    return double(n) * (t1 - wick_a - wick_b - wick_c);
  };
  return jackknife_stream(run.num_networks(), gen, fn);
}

NormalizedVertex normalize_vertex(double v, const std::function<double(int, int)>& kernel,
                                  const std::array<int, 4>& s) {
  auto eq = [&](int i, int j) { return s[i] == s[j]; };
  auto count_of = [&](int i) {
    int c = 0;
    for (int j = 0; j < 4; ++j) c += eq(i, j);
    return c;
  };
  auto generic = [&] {
    return (kernel(s[0], s[1]) * kernel(s[2], s[3]) + kernel(s[0], s[2]) * kernel(s[1], s[3]) +
            kernel(s[0], s[3]) * kernel(s[1], s[2])) /
           3.0;
  };
  double denom;
  if (eq(0, 1) && eq(0, 2) && eq(0, 3)) {
    double k = kernel(s[0], s[0]);
    denom = k * k;
  } else if (eq(0, 1) && eq(2, 3)) {
    denom = 0.5 * (kernel(s[0], s[0]) * kernel(s[2], s[2]) +
                   kernel(s[0], s[2]) * kernel(s[0], s[2]));
  } else if (count_of(0) == 3 || count_of(1) == 3) {
    // triple + one distinct: K_aa K_ab with a the tripled sample
    int a = count_of(0) == 3 ? s[0] : s[1];
    int b = a;
    for (int j = 0; j < 4; ++j)
      if (s[j] != a) b = s[j];
    denom = kernel(a, a) * kernel(a, b);
  } else if ((eq(0, 2) || eq(0, 3) || eq(1, 2) || eq(1, 3)) && !eq(0, 1) && !eq(2, 3) &&
             (count_of(0) == 2 || count_of(1) == 2) && (count_of(2) == 2 || count_of(3) == 2) &&
             count_of(0) + count_of(1) + count_of(2) + count_of(3) == 6) {
    // three distinct, repeated sample shared across the pairs: (ab)(ca) form
    int shared = count_of(0) == 2 ? s[0] : s[1];
    int other1 = count_of(0) == 2 ? s[1] : s[0];
    int other2 = count_of(2) == 2 ? s[3] : s[2];
    denom = 0.5 * (kernel(shared, other1) * kernel(shared, other2) +
                   kernel(shared, shared) * kernel(other1, other2));
  } else {
    // four distinct, and any arrangement outside the measured patterns
    denom = generic();
  }
  if (denom == 0.0 || !std::isfinite(denom)) return {v, true};
  return {v / denom, false};
}

stats::Estimate measure_g2m(const EnsembleRun& run, int a, int layer, int m) {
  const Eigen::MatrixXd& z = run.z(a, layer);
  int n = int(z.cols());
  if (m < 1 || m > 4) throw std::invalid_argument("measure_g2m: m in 1..4");
  if (m > n) throw std::invalid_argument("measure_g2m: needs m distinct neurons, m <= n");
  double tuples = 1.0;
  for (int t = 0; t < m; ++t) tuples *= double(n - t);
  std::vector<double> per_net(run.num_networks());
  for (int k = 0; k < run.num_networks(); ++k) {
    Eigen::ArrayXd u = z.row(k).transpose().array().square();
    // elementary symmetric polynomial e_m from power sums (Newton)
    double p[5] = {0, 0, 0, 0, 0}, e[5] = {1, 0, 0, 0, 0};
    for (int t = 1; t <= m; ++t) p[t] = u.pow(t).sum();
    for (int t = 1; t <= m; ++t) {
      double acc = 0.0;
      for (int r = 1; r <= t; ++r) acc += (r % 2 == 1 ? 1.0 : -1.0) * e[t - r] * p[r];
      e[t] = acc / double(t);
    }
    double mfact = 1.0;
    for (int t = 2; t <= m; ++t) mfact *= double(t);
    per_net[k] = mfact * e[m] / tuples;
  }
  return stats::mean_and_stderr(per_net);
}

stats::Estimate measure_nlo_metric(const EnsembleRun& run, int a, int layer, double k_theory) {
  stats::Estimate kest = measure_kernel(run, a, a, layer);
  int n = int(run.z(a, layer).cols());
  return {double(n) * (kest.value - k_theory), double(n) * kest.stderr_};
}

}  // namespace oel::ens
