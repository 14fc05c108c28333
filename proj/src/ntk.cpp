#include "oel/ntk.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "oel/common.hpp"
#include "oel/parallel.hpp"

namespace oel::ntk {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using tensor::CMapRM;
using tensor::MapRM;

namespace {

struct ActValues {
  VectorXd s, s1, s2, s3;
};

ActValues act_values(const Activation& act, const VectorXd& z, bool need_s3) {
  ActValues a;
  int n = int(z.size());
  a.s.resize(n);
  a.s1.resize(n);
  a.s2.resize(n);
  if (need_s3) a.s3.resize(n);
  for (int i = 0; i < n; ++i) {
    a.s[i] = act.f(z[i]);
    a.s1[i] = act.d1(z[i]);
    a.s2[i] = act.d2(z[i]);
    if (need_s3) a.s3[i] = act.d3(z[i]);
  }
  return a;
}

}  // namespace

void NtkPropagator::check_budget(const Request& request) const {
  std::size_t wmax = 1;
  for (int l = 1; l <= config_.layers; ++l) wmax = std::max(wmax, std::size_t(config_.width(l)));
  auto need = [&](int rank) {
    std::size_t b = 8;
    for (int r = 0; r < rank; ++r) b *= wmax;
    return b;
  };
  bool has_quads = !request.quads_ddi.empty() || !request.quads_ddii.empty();
  if ((has_quads || !request.triples.empty()) && wmax > 64)
    throw ResourceError("dNTK/ddNTK tensors materialize only for width <= 64; requested width " +
                        std::to_string(wmax));
  // factor 3 covers propagation temporaries
  std::size_t total = request.pairs.size() * need(2) * 2 +
                      request.triples.size() * need(3) * 3 +
                      (request.quads_ddi.size() + request.quads_ddii.size()) * need(4) * 3;
  if (total > request.memory_budget_bytes) {
    std::string offender = has_quads ? "ddNTK (width^4) tensor" : "dNTK (width^3) tensor";
    throw ResourceError(offender + " set needs " + std::to_string(total) +
                        " bytes, budget is " + std::to_string(request.memory_budget_bytes));
  }
}

NtkPropagator::NtkPropagator(const NetworkConfig& config, const ParameterSet& params,
                             const LearningRateTensor& lr,
                             const std::vector<VectorXd>& inputs, Request request)
    : config_(config), params_(params), lr_(lr), inputs_(inputs) {
  config_.validate();
  if (int(lr.lambda_b.size()) < config.layers)
    throw std::invalid_argument("learning-rate schedule shorter than network");
  check_budget(request);

  // closure: quads need dNTK triples, triples need NTK pairs
  std::set<std::array<int, 3>> triples(request.triples.begin(), request.triples.end());
  for (const auto& q : request.quads_ddi) {
    triples.insert({q[0], q[1], q[2]});
    triples.insert({q[0], q[1], q[3]});
    triples.insert({q[0], q[2], q[3]});
  }
  for (const auto& q : request.quads_ddii) {
    triples.insert({q[0], q[1], q[2]});
    triples.insert({q[1], q[0], q[3]});
  }
  std::set<std::array<int, 2>> pairs(request.pairs.begin(), request.pairs.end());
  for (const auto& t : triples) {
    pairs.insert({t[0], t[1]});
    pairs.insert({t[0], t[2]});
  }
  for (const auto& q : request.quads_ddii) pairs.insert({q[1], q[3]});
  for (const auto& q : request.quads_ddi) pairs.insert({q[0], q[3]});

  for (const auto& x : inputs_)
    if (x.size() != config_.n_in) throw std::invalid_argument("ntk: input width mismatch");

  // layer-1 base case: H = delta * (lambda_b + lambda_w x.x / n0); all
  // descendants vanish because the first layer is linear in its parameters.
  layer_ = 1;
  int m = config_.width(1);
  double lb = lr_.lambda_b[0], lw = lr_.lambda_w[0] / double(config_.n_in);
  z_.reserve(inputs_.size());
  for (const auto& x : inputs_) z_.push_back(params_.biases[0] + params_.weights[0] * x);
  for (const auto& p : pairs) {
    double c = lb + lw * inputs_.at(p[0]).dot(inputs_.at(p[1]));
    h_.emplace(p, c * MatrixXd::Identity(m, m));
  }
  for (const auto& t : triples) dh_.emplace(t, Tensor3(m, m, m));
  for (const auto& q : request.quads_ddi) ddi_.emplace(q, Tensor4(m, m, m, m));
  for (const auto& q : request.quads_ddii) ddii_.emplace(q, Tensor4(m, m, m, m));
}

const MatrixXd& NtkPropagator::ntk(int a, int b) const { return h_.at({a, b}); }
const Tensor3& NtkPropagator::dntk(int a0, int a1, int a2) const { return dh_.at({a0, a1, a2}); }
const Tensor4& NtkPropagator::ddntk_i(const std::array<int, 4>& q) const { return ddi_.at(q); }
const Tensor4& NtkPropagator::ddntk_ii(const std::array<int, 4>& q) const { return ddii_.at(q); }

void NtkPropagator::step() {
  if (done()) throw std::logic_error("NtkPropagator: already at final layer");
  const int n = config_.width(layer_);
  const int m = config_.width(layer_ + 1);
  const MatrixXd& w = params_.weights[layer_];
  const double lb = lr_.lambda_b[layer_];
  const double lw_n = lr_.lambda_w[layer_] / double(n);
  Activation act{config_.act};
  const bool need_s3 = !ddi_.empty();

  const int ns = int(inputs_.size());
  std::vector<ActValues> av(ns);
  std::vector<MatrixXd> phi(ns), psi(ns), psi3(ns);
  for (int s = 0; s < ns; ++s) {
    av[s] = act_values(act, z_[s], need_s3);
    phi[s] = w * av[s].s1.asDiagonal();
    psi[s] = w * av[s].s2.asDiagonal();
    if (need_s3) psi3[s] = w * av[s].s3.asDiagonal();
  }

  auto a_mat = [&](int a, int b) -> MatrixXd {  // H_(ab) Phi_b^T, n x m
    return h_.at({a, b}) * phi[b].transpose();
  };

  // ---- ddNTK-I --------------------------------------------------------
  std::map<std::array<int, 4>, Tensor4> ddi_new;
  for (auto& [q, t] : ddi_) {
    int a1 = q[0], a2 = q[1], a3 = q[2], a4 = q[3];
    MatrixXd A2 = a_mat(a1, a2), A3 = a_mat(a1, a3), A4 = a_mat(a1, a4);
    Tensor3 dHP34 = tensor::mul_tail2(dh_.at({a1, a3, a4}), phi[a3], phi[a4]);
    Tensor3 dHP24 = tensor::mul_tail2(dh_.at({a1, a2, a4}), phi[a2], phi[a4]);
    Tensor3 dHP23 = tensor::mul_tail2(dh_.at({a1, a2, a3}), phi[a2], phi[a3]);

    Tensor4 out = tensor::multi_mode(t, phi[a1], phi[a2], phi[a3], phi[a4]);

    // interior sigma''' source: sum_j W sigma''' A2 A3 A4
    tensor::RowMat c(n, std::size_t(m) * m * m);
    for (int j = 0; j < n; ++j) {
      double* row = c.data() + std::size_t(j) * m * m * m;
      for (int i2 = 0; i2 < m; ++i2)
        for (int i3 = 0; i3 < m; ++i3) {
          double a23 = A2(j, i2) * A3(j, i3);
          double* slab = row + (std::size_t(i2) * m + i3) * m;
          for (int i4 = 0; i4 < m; ++i4) slab[i4] = a23 * A4(j, i4);
        }
    }
    MapRM(out.v.data(), m, std::size_t(m) * m * m).noalias() += psi3[a1] * c;

    // interior sigma'' source against the propagated dNTK, three pairings
    for (int j = 0; j < n; ++j) {
      double* row = c.data() + std::size_t(j) * m * m * m;
      for (int i2 = 0; i2 < m; ++i2)
        for (int i3 = 0; i3 < m; ++i3) {
          double d23 = dHP23(j, i2, i3);
          double a2j = A2(j, i2), a3j = A3(j, i3);
          double* slab = row + (std::size_t(i2) * m + i3) * m;
          for (int i4 = 0; i4 < m; ++i4)
            slab[i4] = d23 * A4(j, i4) + dHP24(j, i2, i4) * a3j + dHP34(j, i3, i4) * a2j;
        }
    }
    MapRM(out.v.data(), m, std::size_t(m) * m * m).noalias() += psi[a1] * c;

    // boundary terms: one lambda pair lands on this layer's weights
    VectorXd c1 = av[a2].s.cwiseProduct(av[a1].s2);
    VectorXd c1p = av[a2].s.cwiseProduct(av[a1].s1);
    MatrixXd M1 =
        lw_n * (A3.transpose() * c1.asDiagonal() * A4 + tensor::contract_first(dHP34, c1p));
    VectorXd c2 = av[a3].s.cwiseProduct(av[a1].s2);
    VectorXd c2p = av[a3].s.cwiseProduct(av[a1].s1);
    MatrixXd M2 =
        lw_n * (A2.transpose() * c2.asDiagonal() * A4 + tensor::contract_first(dHP24, c2p));
    VectorXd c3 = av[a4].s.cwiseProduct(av[a1].s2);
    VectorXd c3p = av[a4].s.cwiseProduct(av[a1].s1);
    MatrixXd M3 =
        lw_n * (A2.transpose() * c3.asDiagonal() * A3 + tensor::contract_first(dHP23, c3p));
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < m; ++p)
        for (int r = 0; r < m; ++r) {
          out(i, i, p, r) += M1(p, r);
          out(i, p, i, r) += M2(p, r);
          out(i, p, r, i) += M3(p, r);
        }
    ddi_new.emplace(q, std::move(out));
  }

  // ---- ddNTK-II -------------------------------------------------------
  std::map<std::array<int, 4>, Tensor4> ddii_new;
  for (auto& [q, t] : ddii_) {
    int a1 = q[0], a2 = q[1], a3 = q[2], a4 = q[3];
    const MatrixXd& h12 = h_.at({a1, a2});
    MatrixXd A13 = a_mat(a1, a3), A24 = a_mat(a2, a4);
    Tensor3 dX = tensor::mul_last(dh_.at({a1, a2, a3}), phi[a3]);  // (j1:a1, j:a2, i3)
    Tensor3 dY = tensor::mul_last(dh_.at({a2, a1, a4}), phi[a4]);  // (j2:a2, j:a1, i4)

    Tensor4 out = tensor::multi_mode(t, phi[a1], phi[a2], phi[a3], phi[a4]);

    tensor::RowMat P(n, std::size_t(m) * m), Q(n, std::size_t(m) * m);
    for (int j = 0; j < n; ++j)
      for (int i1 = 0; i1 < m; ++i1)
        for (int i3 = 0; i3 < m; ++i3) {
          P(j, std::size_t(i1) * m + i3) = psi[a1](i1, j) * A13(j, i3);
          Q(j, std::size_t(i1) * m + i3) = psi[a2](i1, j) * A24(j, i3);
        }
    tensor::RowMat G = P.transpose() * h12 * Q;  // [(i1,i3),(i2,i4)]

    {  // sigma''(z1) x sigma'(z2): P against Phi2-propagated dY
      Tensor3 dY2(m, n, m);  // (i2, j1, i4)
      MapRM(dY2.v.data(), m, std::size_t(n) * m).noalias() =
          phi[a2] * CMapRM(dY.v.data(), n, std::size_t(n) * m);
      tensor::RowMat R(n, std::size_t(m) * m);
      for (int j1 = 0; j1 < n; ++j1)
        for (int i2 = 0; i2 < m; ++i2)
          for (int i4 = 0; i4 < m; ++i4) R(j1, std::size_t(i2) * m + i4) = dY2(i2, j1, i4);
      G.noalias() += P.transpose() * R;
    }
    {  // sigma'(z1) x sigma''(z2): Phi1-propagated dX against Q
      Tensor3 dX2(m, n, m);  // (i1, j2, i3)
      MapRM(dX2.v.data(), m, std::size_t(n) * m).noalias() =
          phi[a1] * CMapRM(dX.v.data(), n, std::size_t(n) * m);
      tensor::RowMat S(n, std::size_t(m) * m);
      for (int j2 = 0; j2 < n; ++j2)
        for (int i1 = 0; i1 < m; ++i1)
          for (int i3 = 0; i3 < m; ++i3) S(j2, std::size_t(i1) * m + i3) = dX2(i1, j2, i3);
      G.noalias() += S.transpose() * Q;
    }
    for (int i1 = 0; i1 < m; ++i1)
      for (int i2 = 0; i2 < m; ++i2)
        for (int i3 = 0; i3 < m; ++i3)
          for (int i4 = 0; i4 < m; ++i4)
            out(i1, i2, i3, i4) += G(std::size_t(i1) * m + i3, std::size_t(i2) * m + i4);

    VectorXd cb = av[a1].s1.cwiseProduct(av[a2].s1);
    MatrixXd WB = lw_n * (A13.transpose() * cb.asDiagonal() * A24);
    VectorXd cd = av[a2].s1.cwiseProduct(av[a4].s);
    MatrixXd V1 = lw_n * (psi[a1] * (h12 * cd).asDiagonal() * A13 +
                          phi[a1] * tensor::contract_middle(dX, cd));
    VectorXd ce = av[a1].s1.cwiseProduct(av[a3].s);
    MatrixXd V2 = lw_n * (psi[a2] * (h12.transpose() * ce).asDiagonal() * A24 +
                          phi[a2] * tensor::contract_middle(dY, ce));
    VectorXd u = av[a1].s1.cwiseProduct(av[a3].s);
    VectorXd vv = av[a2].s1.cwiseProduct(av[a4].s);
    double sf = lw_n * lw_n * u.dot(h12 * vv);
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < m; ++p)
        for (int r = 0; r < m; ++r) {
          out(i, i, p, r) += WB(p, r);
          out(p, i, r, i) += V1(p, r);
          out(i, p, i, r) += V2(p, r);
        }
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k) out(i, k, i, k) += sf;
    ddii_new.emplace(q, std::move(out));
  }

  // ---- dNTK -----------------------------------------------------------
  std::map<std::array<int, 3>, Tensor3> dh_new;
  for (auto& [tr, t] : dh_) {
    int a0 = tr[0], a1 = tr[1], a2 = tr[2];
    MatrixXd A1 = a_mat(a0, a1), A2 = a_mat(a0, a2);
    Tensor3 out = tensor::multi_mode(t, phi[a0], phi[a1], phi[a2]);
    {
      tensor::RowMat c(n, std::size_t(m) * m);
      for (int j = 0; j < n; ++j)
        for (int i1 = 0; i1 < m; ++i1)
          for (int i2 = 0; i2 < m; ++i2)
            c(j, std::size_t(i1) * m + i2) = A1(j, i1) * A2(j, i2);
      MapRM(out.v.data(), m, std::size_t(m) * m).noalias() += psi[a0] * c;
    }
    VectorXd ga = lw_n * (A2.transpose() * av[a0].s1.cwiseProduct(av[a1].s));
    VectorXd gb = lw_n * (A1.transpose() * av[a0].s1.cwiseProduct(av[a2].s));
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k) {
        out(i, i, k) += ga(k);
        out(i, k, i) += gb(k);
      }
    dh_new.emplace(tr, std::move(out));
  }

  // ---- NTK ------------------------------------------------------------
  std::map<std::array<int, 2>, MatrixXd> h_new;
  for (auto& [p, hm] : h_) {
    double c = lb + lw_n * av[p[0]].s.dot(av[p[1]].s);
    MatrixXd next = phi[p[0]] * hm * phi[p[1]].transpose();
    next.diagonal().array() += c;
    h_new.emplace(p, std::move(next));
  }

  for (int s = 0; s < ns; ++s) z_[s] = params_.biases[layer_] + w * av[s].s;
  h_ = std::move(h_new);
  dh_ = std::move(dh_new);
  ddi_ = std::move(ddi_new);
  ddii_ = std::move(ddii_new);
  ++layer_;
}

std::map<std::array<int, 2>, MatrixXd> ntk_forward(
    const NetworkConfig& config, const ParameterSet& params, const LearningRateTensor& lr,
    const std::vector<VectorXd>& inputs, const std::vector<std::array<int, 2>>& pairs) {
  NtkPropagator::Request req;
  req.pairs = pairs;
  NtkPropagator prop(config, params, lr, inputs, req);
  while (!prop.done()) prop.step();
  std::map<std::array<int, 2>, MatrixXd> out;
  for (const auto& p : pairs) out.emplace(p, prop.ntk(p[0], p[1]));
  return out;
}

std::map<std::array<int, 3>, Tensor3> dntk(const NetworkConfig& config,
                                           const ParameterSet& params,
                                           const LearningRateTensor& lr,
                                           const std::vector<VectorXd>& inputs,
                                           const std::vector<std::array<int, 3>>& triples,
                                           std::size_t memory_budget) {
  NtkPropagator::Request req;
  req.triples = triples;
  req.memory_budget_bytes = memory_budget;
  NtkPropagator prop(config, params, lr, inputs, req);
  while (!prop.done()) prop.step();
  std::map<std::array<int, 3>, Tensor3> out;
  for (const auto& t : triples) out.emplace(t, prop.dntk(t[0], t[1], t[2]));
  return out;
}

DdntkResult ddntk(const NetworkConfig& config, const ParameterSet& params,
                  const LearningRateTensor& lr, const std::vector<VectorXd>& inputs,
                  const std::vector<std::array<int, 4>>& quads, std::size_t memory_budget) {
  NtkPropagator::Request req;
  req.quads_ddi = quads;
  req.quads_ddii = quads;
  req.memory_budget_bytes = memory_budget;
  NtkPropagator prop(config, params, lr, inputs, req);
  while (!prop.done()) prop.step();
  DdntkResult out;
  for (const auto& q : quads) {
    out.first.emplace(q, prop.ddntk_i(q));
    out.second.emplace(q, prop.ddntk_ii(q));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

enum Feat {
  kTheta = 0, kKernel, kPA, kPB, kPD, kPF, kPP, kPQ, kPR, kPS, kPT, kPU, kWidth, kNumFeat
};

void layer_features(const NtkPropagator& prop, bool with_dntk, bool with_ddntk, double* f) {
  const MatrixXd& h = prop.ntk(0, 0);
  const VectorXd& z = prop.z(0);
  int n = int(h.rows());
  double pairs = double(n) * (n - 1);
  VectorXd hd = h.diagonal();
  VectorXd z2 = z.array().square();
  f[kTheta] = hd.mean();
  f[kKernel] = z2.mean();
  f[kPA] = (hd.sum() * hd.sum() - hd.squaredNorm()) / pairs;
  f[kPB] = (h.squaredNorm() - hd.squaredNorm()) / pairs;
  f[kPD] = (z2.sum() * hd.sum() - z2.dot(hd)) / pairs;
  f[kPF] = (z.dot(h * z) - z2.dot(hd)) / pairs;
  f[kPP] = f[kPQ] = f[kPR] = f[kPS] = f[kPT] = f[kPU] = 0.0;
  f[kWidth] = double(n);
  if (with_dntk) {
    const Tensor3& dh = prop.dntk(0, 0, 0);
    double sp = 0, sq = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          sp += dh(i, j, j) * z[i];
          sq += dh(i, i, j) * z[j];
        }
    f[kPP] = sp / pairs;
    f[kPQ] = sq / pairs;
  }
  if (with_ddntk) {
    const Tensor4& di = prop.ddntk_i({0, 0, 0, 0});
    const Tensor4& dii = prop.ddntk_ii({0, 0, 0, 0});
    double sr = 0, ss = 0, st = 0, su = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          sr += di(i, i, j, j);
          ss += dii(i, i, j, j);
          st += dii(i, j, i, j);
          su += dii(i, j, j, i);
        }
    f[kPR] = sr / pairs;
    f[kPS] = ss / pairs;
    f[kPT] = st / pairs;
    f[kPU] = su / pairs;
  }
}

}  // namespace

NtkCorrelatorTable measure_ntk_correlators(const NtkEnsembleSpec& spec) {
  int layers = spec.config.layers;
  int nets = spec.num_networks;
  if (nets < 2) throw std::invalid_argument("ntk ensemble needs >= 2 networks");
  std::vector<MatrixXd> raw(nets);  // layers x kNumFeat
  SeedTree root(spec.master_seed);
  parallel_for(nets, spec.workers, [&](int k) {
    ParameterSet params = init_network(spec.config, root.child("net", std::uint64_t(k)));
    NtkPropagator::Request req;
    req.pairs = {{0, 0}};
    if (spec.with_dntk || spec.with_ddntk) req.triples = {{0, 0, 0}};
    if (spec.with_ddntk) {
      req.quads_ddi = {{0, 0, 0, 0}};
      req.quads_ddii = {{0, 0, 0, 0}};
    }
    req.memory_budget_bytes = spec.memory_budget_bytes;
    NtkPropagator prop(spec.config, params, spec.lr, {spec.input}, std::move(req));
    raw[k].resize(layers, kNumFeat);
    double buf[kNumFeat];
    for (int l = 1; l <= layers; ++l) {
      if (l > 1) prop.step();
      layer_features(prop, spec.with_dntk, spec.with_ddntk, buf);
      for (int c = 0; c < kNumFeat; ++c) raw[k](l - 1, c) = buf[c];
    }
  });

  NtkCorrelatorTable table;
  table.layers = layers;
  auto add_series = [&](const std::string& name,
                        const std::function<double(const Eigen::VectorXd&)>& fn) {
    std::vector<stats::Estimate> est(layers);
    for (int l = 0; l < layers; ++l) {
      std::vector<Eigen::VectorXd> feats(nets);
      for (int k = 0; k < nets; ++k) feats[k] = raw[k].row(l).transpose();
      est[l] = stats::jackknife(feats, fn);
    }
    table.series.emplace(name, std::move(est));
  };

  auto raw_stat = [](int idx) {
    return [idx](const Eigen::VectorXd& f) { return f[kWidth] * f[idx]; };
  };
  add_series("theta", [](const Eigen::VectorXd& f) { return f[kTheta]; });
  add_series("kernel", [](const Eigen::VectorXd& f) { return f[kKernel]; });
  add_series("A", [](const Eigen::VectorXd& f) {
    return f[kWidth] * (f[kPA] - f[kTheta] * f[kTheta]);
  });
  add_series("B", raw_stat(kPB));
  add_series("D", [](const Eigen::VectorXd& f) {
    return f[kWidth] * (f[kPD] - f[kKernel] * f[kTheta]);
  });
  add_series("F", raw_stat(kPF));
  add_series("A_norm", [](const Eigen::VectorXd& f) {
    return f[kWidth] * (f[kPA] - f[kTheta] * f[kTheta]) / (f[kTheta] * f[kTheta]);
  });
  add_series("B_norm", [](const Eigen::VectorXd& f) {
    return f[kWidth] * f[kPB] / (f[kTheta] * f[kTheta]);
  });
  add_series("D_norm", [](const Eigen::VectorXd& f) {
    return f[kWidth] * (f[kPD] - f[kKernel] * f[kTheta]) / (f[kKernel] * f[kTheta]);
  });
  add_series("F_norm", [](const Eigen::VectorXd& f) {
    return f[kWidth] * f[kPF] / (f[kKernel] * f[kTheta]);
  });
  if (spec.with_dntk) {
    add_series("P", raw_stat(kPP));
    add_series("Q", raw_stat(kPQ));
    add_series("P_norm", [](const Eigen::VectorXd& f) {
      return f[kWidth] * f[kPP] / (f[kTheta] * f[kTheta]);
    });
    add_series("Q_norm", [](const Eigen::VectorXd& f) {
      return f[kWidth] * f[kPQ] / (f[kTheta] * f[kTheta]);
    });
  }
  if (spec.with_ddntk) {
    add_series("R", raw_stat(kPR));
    add_series("S", raw_stat(kPS));
    add_series("T", raw_stat(kPT));
    add_series("U", raw_stat(kPU));
    auto norm3 = [](int idx) {
      return [idx](const Eigen::VectorXd& f) {
        double th = f[kTheta];
        return f[kWidth] * f[idx] * f[kKernel] / (th * th * th);
      };
    };
    add_series("R_norm", norm3(kPR));
    add_series("S_norm", norm3(kPS));
    add_series("T_norm", norm3(kPT));
    add_series("U_norm", norm3(kPU));
  }
  return table;
}

NtkCorrelatorTable measure_ntk_fluctuations_multi(const NtkMultiSpec& spec) {
  if (spec.inputs.size() != 4) throw std::invalid_argument("multi-input A,B,D,F need 4 inputs");
  int layers = spec.config.layers;
  int nets = spec.num_networks;
  if (nets < 2) throw std::invalid_argument("ntk ensemble needs >= 2 networks");
  // features: theta_ab (6 pairs), k_ab (6 pairs), pA, pB, pD, pF, width
  constexpr int kTh = 0, kKk = 6, kA = 12, kB = 13, kD = 14, kF = 15, kW = 16, kNf = 17;
  const std::array<std::array<int, 2>, 6> prs{{{0, 1}, {2, 3}, {0, 2}, {1, 3}, {0, 3}, {1, 2}}};
  std::vector<MatrixXd> raw(nets);
  SeedTree root(spec.master_seed);
  parallel_for(nets, spec.workers, [&](int k) {
    ParameterSet params = init_network(spec.config, root.child("net", std::uint64_t(k)));
    NtkPropagator::Request req;
    for (const auto& p : prs) req.pairs.push_back({p[0], p[1]});
    NtkPropagator prop(spec.config, params, spec.lr, spec.inputs, std::move(req));
    raw[k].resize(layers, kNf);
    for (int l = 1; l <= layers; ++l) {
      if (l > 1) prop.step();
      int n = prop.width();
      double pairs = double(n) * (n - 1);
      for (int pi = 0; pi < 6; ++pi) {
        const MatrixXd& h = prop.ntk(prs[pi][0], prs[pi][1]);
        raw[k](l - 1, kTh + pi) = h.diagonal().mean();
        raw[k](l - 1, kKk + pi) = prop.z(prs[pi][0]).dot(prop.z(prs[pi][1])) / double(n);
      }
      const MatrixXd& h01 = prop.ntk(0, 1);
      const MatrixXd& h23 = prop.ntk(2, 3);
      VectorXd d01 = h01.diagonal(), d23 = h23.diagonal();
      VectorXd z0 = prop.z(0), z1 = prop.z(1);
      VectorXd z01 = z0.cwiseProduct(z1);
      raw[k](l - 1, kA) = (d01.sum() * d23.sum() - d01.dot(d23)) / pairs;
      raw[k](l - 1, kB) = ((h01.array() * h23.array()).sum() - d01.dot(d23)) / pairs;
      raw[k](l - 1, kD) = (z01.sum() * d23.sum() - z01.dot(d23)) / pairs;
      raw[k](l - 1, kF) = (z0.dot(h23 * z1) - z01.dot(d23)) / pairs;
      raw[k](l - 1, kW) = double(n);
    }
  });

  NtkCorrelatorTable table;
  table.layers = layers;
  auto theta_sym = [](const Eigen::VectorXd& f) {
    return (f[kTh + 0] * f[kTh + 1] + f[kTh + 2] * f[kTh + 3] + f[kTh + 4] * f[kTh + 5]) / 3.0;
  };
  auto theta_k_sym = [](const Eigen::VectorXd& f) {
    double acc = 0;
    for (int i = 0; i < 6; i += 2)
      acc += f[kTh + i] * f[kKk + i + 1] + f[kTh + i + 1] * f[kKk + i];
    return acc / 6.0;
  };
  auto add_series = [&](const std::string& name,
                        const std::function<double(const Eigen::VectorXd&)>& fn) {
    std::vector<stats::Estimate> est(layers);
    for (int l = 0; l < layers; ++l) {
      std::vector<Eigen::VectorXd> feats(nets);
      for (int kk = 0; kk < nets; ++kk) feats[kk] = raw[kk].row(l).transpose();
      est[l] = stats::jackknife(feats, fn);
    }
    table.series.emplace(name, std::move(est));
  };
  add_series("A", [](const Eigen::VectorXd& f) {
    return f[kW] * (f[kA] - f[kTh + 0] * f[kTh + 1]);
  });
  add_series("B", [](const Eigen::VectorXd& f) { return f[kW] * f[kB]; });
  add_series("D", [](const Eigen::VectorXd& f) {
    return f[kW] * (f[kD] - f[kKk + 0] * f[kTh + 1]);
  });
  add_series("F", [](const Eigen::VectorXd& f) { return f[kW] * f[kF]; });
  add_series("A_norm", [theta_sym](const Eigen::VectorXd& f) {
    return f[kW] * (f[kA] - f[kTh + 0] * f[kTh + 1]) / theta_sym(f);
  });
  add_series("B_norm", [theta_sym](const Eigen::VectorXd& f) {
    return f[kW] * f[kB] / theta_sym(f);
  });
  add_series("D_norm", [theta_k_sym](const Eigen::VectorXd& f) {
    return f[kW] * (f[kD] - f[kKk + 0] * f[kTh + 1]) / theta_k_sym(f);
  });
  add_series("F_norm", [theta_k_sym](const Eigen::VectorXd& f) {
    return f[kW] * f[kF] / theta_k_sym(f);
  });
  return table;
}

double eval_tracking_probe(const NetworkConfig& config, const ParameterSet& params,
                           const LearningRateTensor& lr, const TrackingProbe& probe) {
  if (probe.mode == TrackingProbe::Mode::cross_neural_single_sample) {
    auto h = ntk_forward(config, params, lr, {probe.probe_input}, {{0, 0}});
    const MatrixXd& m = h.at({0, 0});
    int n = int(m.rows());
    if (n < 2) throw std::invalid_argument("cross-neural probe needs >= 2 output nodes");
    return (m.sum() - m.trace()) / (double(n) * (n - 1));
  }
  if (probe.class_inputs.empty()) throw std::invalid_argument("probe has no class members");
  if (probe.node < 0 || probe.node >= config.n_out)
    throw std::invalid_argument("probe node out of range");
  std::vector<VectorXd> inputs;
  inputs.reserve(1 + probe.class_inputs.size());
  inputs.push_back(probe.probe_input);
  for (const auto& x : probe.class_inputs) inputs.push_back(x);
  std::vector<std::array<int, 2>> pairs;
  for (int b = 1; b <= int(probe.class_inputs.size()); ++b) pairs.push_back({0, b});
  NtkPropagator::Request req;
  req.pairs = pairs;
  NtkPropagator prop(config, params, lr, inputs, std::move(req));
  while (!prop.done()) prop.step();
  double acc = 0;
  for (const auto& p : pairs) acc += prop.ntk(p[0], p[1])(probe.node, probe.node);
  return acc / double(pairs.size());
}

}  // namespace oel::ntk
