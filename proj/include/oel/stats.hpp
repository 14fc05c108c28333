#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oel::stats {

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

inline Estimate mean_and_stderr(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_and_stderr: empty sample");
  double n = double(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

/// Delete-one jackknife for a statistic defined as fn(mean of per-sample
/// feature vectors). Returns the bias-corrected jackknife estimate
/// N f(full) - (N-1) mean(loo), which cancels the O(1/N) plug-in bias of
/// nonlinear connected-correlator estimators (a no-op for linear
/// statistics), plus the jackknife standard error.
inline Estimate jackknife(const std::vector<Eigen::VectorXd>& features,
                          const std::function<double(const Eigen::VectorXd&)>& fn) {
  std::size_t n = features.size();
  if (n < 2) throw std::invalid_argument("jackknife: need at least 2 samples");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(features[0].size());
  for (const auto& f : features) sum += f;
  double value = fn(sum / double(n));
  double mean_loo = 0.0, ss = 0.0;
  std::vector<double> loo(n);
  for (std::size_t k = 0; k < n; ++k) {
    loo[k] = fn((sum - features[k]) / double(n - 1));
    mean_loo += loo[k];
  }
  mean_loo /= double(n);
  for (std::size_t k = 0; k < n; ++k) ss += (loo[k] - mean_loo) * (loo[k] - mean_loo);
  double se = std::sqrt((double(n) - 1.0) / double(n) * ss);
  return {double(n) * value - (double(n) - 1.0) * mean_loo, se};
}

struct SlopeFit {
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;
};

/// Weighted least-squares line fit with weights 1/sigma^2.
inline SlopeFit wls_slope(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& sigma) {
  if (x.size() != y.size() || x.size() != sigma.size() || x.size() < 2)
    throw std::invalid_argument("wls_slope: bad inputs");
  double sw = 0, swx = 0, swy = 0;
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = sigma[i] > 0 ? sigma[i] : 1e-300;
    w[i] = 1.0 / (s * s);
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
  }
  double xbar = swx / sw, ybar = swy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  if (sxx <= 0) throw std::invalid_argument("wls_slope: degenerate x");
  return {sxy / sxx, std::sqrt(1.0 / sxx), ybar - sxy / sxx * xbar};
}

}  // namespace oel::stats
