#pragma once

#include <Eigen/Dense>

#include "oel/rng.hpp"

namespace oel {

/// rows x cols matrix of i.i.d. N(0, CW/cols) entries (fan-in convention).
Eigen::MatrixXd sample_gaussian_matrix(int rows, int cols, double cw, Rng& stream);

/// Haar-distributed n x n orthogonal matrix scaled by sqrt(CW), i.e.
/// O^T O = CW * I. QR of a square Gaussian matrix with the column signs
/// fixed by sign(diag R); without the sign fix the distribution is not Haar.
Eigen::MatrixXd sample_haar_orthogonal(int n, double cw, Rng& stream);

/// Rectangular counterpart: for rows <= cols, M M^T = CW * I (orthonormal
/// scaled rows); for rows >= cols, M^T M = CW * I. Square input reduces to
/// sample_haar_orthogonal.
Eigen::MatrixXd sample_semi_orthogonal(int rows, int cols, double cw, Rng& stream);

}  // namespace oel
