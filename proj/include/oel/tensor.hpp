#pragma once

#include <Eigen/Dense>
#include <vector>

namespace oel {

/// Dense rank-3 tensor, row-major (last index fastest).
struct Tensor3 {
  int d0 = 0, d1 = 0, d2 = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int a, int b, int c) : d0(a), d1(b), d2(c), v(std::size_t(a) * b * c, 0.0) {}
  double& operator()(int i, int j, int k) { return v[(std::size_t(i) * d1 + j) * d2 + k]; }
  double operator()(int i, int j, int k) const { return v[(std::size_t(i) * d1 + j) * d2 + k]; }
  void set_zero() { std::fill(v.begin(), v.end(), 0.0); }
};

/// Dense rank-4 tensor, row-major.
struct Tensor4 {
  int d0 = 0, d1 = 0, d2 = 0, d3 = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(int a, int b, int c, int d)
      : d0(a), d1(b), d2(c), d3(d), v(std::size_t(a) * b * c * d, 0.0) {}
  double& operator()(int i, int j, int k, int l) {
    return v[((std::size_t(i) * d1 + j) * d2 + k) * d3 + l];
  }
  double operator()(int i, int j, int k, int l) const {
    return v[((std::size_t(i) * d1 + j) * d2 + k) * d3 + l];
  }
  void set_zero() { std::fill(v.begin(), v.end(), 0.0); }
};

namespace tensor {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

/// out[..., a] = sum_k in[..., k] * m(a, k), flattening leading modes.
inline Tensor3 mul_last(const Tensor3& t, const Eigen::MatrixXd& m) {
  Tensor3 out(t.d0, t.d1, int(m.rows()));
  MapRM(out.v.data(), std::size_t(t.d0) * t.d1, m.rows()) =
      CMapRM(t.v.data(), std::size_t(t.d0) * t.d1, t.d2) * m.transpose();
  return out;
}

inline Tensor4 mul_last(const Tensor4& t, const Eigen::MatrixXd& m) {
  Tensor4 out(t.d0, t.d1, t.d2, int(m.rows()));
  MapRM(out.v.data(), std::size_t(t.d0) * t.d1 * t.d2, m.rows()) =
      CMapRM(t.v.data(), std::size_t(t.d0) * t.d1 * t.d2, t.d3) * m.transpose();
  return out;
}

/// out(j, k, i) = in(i, j, k).
inline Tensor3 rotate_left(const Tensor3& t) {
  Tensor3 out(t.d1, t.d2, t.d0);
  for (int i = 0; i < t.d0; ++i)
    for (int j = 0; j < t.d1; ++j)
      for (int k = 0; k < t.d2; ++k) out(j, k, i) = t(i, j, k);
  return out;
}

/// out(j, k, l, i) = in(i, j, k, l).
inline Tensor4 rotate_left(const Tensor4& t) {
  Tensor4 out(t.d1, t.d2, t.d3, t.d0);
  for (int i = 0; i < t.d0; ++i)
    for (int j = 0; j < t.d1; ++j)
      for (int k = 0; k < t.d2; ++k)
        for (int l = 0; l < t.d3; ++l) out(j, k, l, i) = t(i, j, k, l);
  return out;
}

/// out[a,b,c] = sum_{ijk} A0(a,i) A1(b,j) A2(c,k) in[i,j,k].
inline Tensor3 multi_mode(const Tensor3& t, const Eigen::MatrixXd& a0, const Eigen::MatrixXd& a1,
                          const Eigen::MatrixXd& a2) {
  Tensor3 u = rotate_left(mul_last(t, a2));        // (j, c, i)
  u = rotate_left(mul_last(u, a0));                // (c, a, j)
  u = rotate_left(mul_last(u, a1));                // (a, b, c)
  return u;
}

/// out[a,b,c,d] = sum A0(a,i) A1(b,j) A2(c,k) A3(d,l) in[i,j,k,l].
inline Tensor4 multi_mode(const Tensor4& t, const Eigen::MatrixXd& a0, const Eigen::MatrixXd& a1,
                          const Eigen::MatrixXd& a2, const Eigen::MatrixXd& a3) {
  Tensor4 u = rotate_left(mul_last(t, a3));        // (j, k, d, i)
  u = rotate_left(mul_last(u, a0));                // (k, d, a, j)
  u = rotate_left(mul_last(u, a1));                // (d, a, b, k)
  u = rotate_left(mul_last(u, a2));                // (a, b, c, d)
  return u;
}

/// out(m0, i, j) = sum_{k,l} in(m0, k, l) b(i, k) c(j, l): propagate the two
/// trailing modes, keeping the first.
inline Tensor3 mul_tail2(const Tensor3& t, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c) {
  Tensor3 u = mul_last(t, c);  // (m0, k, j)
  Tensor3 out(t.d0, int(b.rows()), int(c.rows()));
  for (int m0 = 0; m0 < t.d0; ++m0)
    MapRM(out.v.data() + std::size_t(m0) * out.d1 * out.d2, b.rows(), u.d2) =
        b * CMapRM(u.v.data() + std::size_t(m0) * u.d1 * u.d2, u.d1, u.d2);
  return out;
}

/// out(k, l) = sum_j w(j) in(j, k, l): contract the leading mode.
inline Eigen::MatrixXd contract_first(const Tensor3& t, const Eigen::VectorXd& w) {
  CMapRM flat(t.v.data(), t.d0, std::size_t(t.d1) * t.d2);
  Eigen::RowVectorXd r = w.transpose() * flat;
  return Eigen::Map<const RowMat>(r.data(), t.d1, t.d2);
}

/// out(i, l) = sum_j w(j) in(i, j, l): contract the middle mode.
inline Eigen::MatrixXd contract_middle(const Tensor3& t, const Eigen::VectorXd& w) {
  Eigen::MatrixXd out(t.d0, t.d2);
  for (int i = 0; i < t.d0; ++i)
    out.row(i) = w.transpose() *
                 CMapRM(t.v.data() + std::size_t(i) * t.d1 * t.d2, t.d1, t.d2);
  return out;
}

}  // namespace tensor
}  // namespace oel
