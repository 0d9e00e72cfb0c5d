#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

#include <Eigen/Dense>

#include "maxcontrast/core.hpp"

namespace maxcontrast {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct NotSymmetric : Error {
  NotSymmetric() : Error("matrix is not symmetric") {}
};

struct IndefiniteMatrix : Error {
  IndefiniteMatrix() : Error("matrix has a negative pivot; not positive semi-definite") {}
};

struct SingularSigma : Error {
  SingularSigma() : Error("covariance is singular; density undefined") {}
};

// Rank-revealing factorization of a PSD matrix: sigma ~ factor * factor^T,
// factor is m x rank. Row order is preserved; the pivot order used during
// elimination is recorded for the integrator.
struct CovarianceModel {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd factor;
  int rank = 0;
  std::vector<int> pivot_order;  // pivot_order[j] = row eliminated at step j
};

struct QmcConfig {
  double abs_error_tol = 1e-3;
  std::size_t max_points = std::size_t{1} << 24;  // total across shifts
  std::uint64_t seed = 0;
  double confidence_mult = 3.5;
};

struct ProbEstimate {
  double value = 0;        // clamped to [0,1]
  double est_error = 0;    // confidence_mult * standard error over shifts
  std::size_t points_used = 0;
  bool budget_exhausted = false;
};

CovarianceModel factorize(const Eigen::MatrixXd& sigma, double tol = 1e-10);

// P(X_1 <= upper_1, ..., X_m <= upper_m) for X ~ noncentral multivariate t
// with nu degrees of freedom, noncentrality delta and scale matrix cov.sigma
// (possibly singular). Entries of upper may be +inf.
ProbEstimate mvt_cdf(const Eigen::VectorXd& upper, const CovarianceModel& cov,
                     double nu, const Eigen::VectorXd& delta, const QmcConfig& cfg);

// Same integral without the chi-square mixing (nu = infinity).
ProbEstimate mvn_cdf(const Eigen::VectorXd& upper, const CovarianceModel& cov,
                     const Eigen::VectorXd& mean, const QmcConfig& cfg);

// Density of the m-variate central t distribution t_m(sigma, gamma) at s.
// Only defined for full-rank sigma.
double mvt_null_density(const Eigen::VectorXd& s, const CovarianceModel& cov,
                        double gamma);

enum class StatKind { t_like, s_like, m_like };

// Monte-Carlo draws of the statistic vector: rows are draws of
// (L z + lambda) / sqrt(W/gamma) for t_like/s_like, or L z + lambda for
// m_like (Gaussian, no mixing).
Eigen::MatrixXd sample_statistics(StatKind kind, const CovarianceModel& cov,
                                  double gamma, const Eigen::VectorXd& lambda,
                                  std::size_t count, std::uint64_t seed);

}  // namespace maxcontrast
