#include "oel/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace oel {

namespace {

Eigen::MatrixXd standard_gaussian(int rows, int cols, Rng& stream) {
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill order pins the draw sequence independent of storage.
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = stream.next_normal();
  return m;
}

// Thin Q of an m x k Gaussian matrix (m >= k) with columns sign-corrected by
// diag(R); sign(0) maps to +1.
Eigen::MatrixXd haar_thin_q(int m, int k, Rng& stream) {
  Eigen::MatrixXd a = standard_gaussian(m, k, stream);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, k);
  for (int c = 0; c < k; ++c)
    if (qr.matrixQR()(c, c) < 0.0) q.col(c) = -q.col(c);
  return q;
}

}  // namespace

Eigen::MatrixXd sample_gaussian_matrix(int rows, int cols, double cw, Rng& stream) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("sample_gaussian_matrix: dims >= 1");
  if (!(cw > 0.0)) throw std::invalid_argument("sample_gaussian_matrix: CW > 0");
  return std::sqrt(cw / double(cols)) * standard_gaussian(rows, cols, stream);
}

Eigen::MatrixXd sample_haar_orthogonal(int n, double cw, Rng& stream) {
  if (n < 1) throw std::invalid_argument("sample_haar_orthogonal: n >= 1");
  return std::sqrt(cw) * haar_thin_q(n, n, stream);
}

Eigen::MatrixXd sample_semi_orthogonal(int rows, int cols, double cw, Rng& stream) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("sample_semi_orthogonal: dims >= 1");
  if (rows <= cols) return std::sqrt(cw) * haar_thin_q(cols, rows, stream).transpose();
  return std::sqrt(cw) * haar_thin_q(rows, cols, stream);
}

}  // namespace oel
