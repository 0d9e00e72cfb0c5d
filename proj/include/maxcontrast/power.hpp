#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "maxcontrast/core.hpp"
#include "maxcontrast/mvdist.hpp"
#include "maxcontrast/tests.hpp"

namespace maxcontrast {

// Raised by the critical-value solvers when the integrator runs out of
// points before the root can be pinned down at the requested tolerance.
struct BudgetExhausted : Error {
  BudgetExhausted() : Error("integration budget exhausted before the critical value was resolved") {}
};

struct CriticalValues {
  double u_alpha = 0;
  double v_alpha = 0;
  Eigen::VectorXd k_inv;         // sqrt(c_k'c_k / c_k'Dc_k)
  Eigen::VectorXd thresholds_T;  // u_alpha * 1
  Eigen::VectorXd thresholds_S;  // k_inv * v_alpha
};

struct PowerResult {
  double beta = 0;
  double est_error = 0;
  StatKind kind = StatKind::t_like;
};

struct RtpEstimate {
  double value = 0;
  double std_error = 0;  // binomial
  std::size_t draws = 0;
};

Eigen::VectorXd noncentrality(StatKind kind, const Eigen::VectorXd& mu, double sigma2,
                              const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes);

// u solves 1 - P(X <= u*1; sigma_t, gamma) = alpha. Bisection on [0, 10].
double critical_u(double alpha, const CovarianceModel& sigma_t, double gamma,
                  const QmcConfig& cfg);

// v solves 1 - P(X <= k_inv*v; sigma_T, gamma) = alpha; returns (v, k_inv).
std::pair<double, Eigen::VectorXd> critical_v(double alpha, const ContrastMatrix& c,
                                              const Eigen::VectorXd& inv_sizes,
                                              double gamma, const QmcConfig& cfg);

CriticalValues critical_values(double alpha, const ContrastMatrix& c,
                               const Eigen::VectorXd& inv_sizes, double gamma,
                               const QmcConfig& cfg);

// Rejection probability P(any X_k >= thresholds_k) for X ~ t_m(sigma, gamma,
// lambda). The building block behind power_T / power_S; exposed so callers
// holding precomputed critical values avoid a second root-find.
PowerResult power_at_thresholds(const CovarianceModel& sigma, double gamma,
                                const Eigen::VectorXd& lambda,
                                const Eigen::VectorXd& thresholds, StatKind kind,
                                const QmcConfig& cfg);

PowerResult power_T(const Eigen::VectorXd& mu, double sigma2, const ContrastMatrix& c,
                    const Eigen::VectorXd& inv_sizes, double gamma, double alpha,
                    const QmcConfig& cfg);
PowerResult power_S(const Eigen::VectorXd& mu, double sigma2, const ContrastMatrix& c,
                    const Eigen::VectorXd& inv_sizes, double gamma, double alpha,
                    const QmcConfig& cfg);

// argmin_k k_inv(k), smallest index on ties (1-based)
int priority_index(const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes);

// Monte-Carlo estimate of P(max >= critical and component k_true attains the
// max), under mu = delta * c_row(k_true). kind selects the T or S statistic.
RtpEstimate r_tp(StatKind kind, int k_true, double delta, double sigma2,
                 const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes,
                 double gamma, double alpha, std::size_t mc_count,
                 std::uint64_t seed, const QmcConfig& cfg);

// Same estimate with the distribution and critical value already in hand.
RtpEstimate r_tp_at(StatKind kind, const CovarianceModel& sigma, double gamma,
                    const Eigen::VectorXd& lambda, double critical, int k_true,
                    std::size_t mc_count, std::uint64_t seed);

}  // namespace maxcontrast
