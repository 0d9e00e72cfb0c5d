#include "maxcontrast/power.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace maxcontrast {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0 && alpha < 1)) {
    throw Error("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

Eigen::VectorXd k_inv_vector(const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes) {
  if (c.cols() != inv_sizes.size()) {
    throw DimensionMismatch("contrast/group-size dimension mismatch");
  }
  const Eigen::MatrixXd d = inv_sizes.asDiagonal();
  Eigen::VectorXd out(c.rows());
  for (Eigen::Index k = 0; k < c.rows(); ++k) {
    const auto row = c.coef.row(k);
    out(k) = std::sqrt(row.squaredNorm() / (row * d * row.transpose())(0));
  }
  return out;
}

// Exceedance probability 1 - P(X <= shape * x) as a function of x, for the
// null m-variate t law. Monotone decreasing; shape entries are positive.
double exceedance(double x, const Eigen::VectorXd& shape, const CovarianceModel& model,
                  double gamma, const QmcConfig& cfg, double* err, bool* exhausted) {
  const Eigen::VectorXd delta = Eigen::VectorXd::Zero(shape.size());
  const ProbEstimate est = mvt_cdf(shape * x, model, gamma, delta, cfg);
  if (err != nullptr) *err = est.est_error;
  if (exhausted != nullptr) *exhausted |= est.budget_exhausted;
  return 1.0 - est.value;
}

// Bisection on [0, 10]: a cheap low-accuracy phase narrows the bracket, then a
// tight phase runs until the bracket collapses or the defect disappears into
// the integrator's own error estimate.
double solve_critical(double alpha, const Eigen::VectorXd& shape,
                      const CovarianceModel& model, double gamma,
                      const QmcConfig& cfg) {
  check_alpha(alpha);
  double lo = 0.0;
  double hi = 10.0;

  QmcConfig coarse = cfg;
  coarse.abs_error_tol = std::max(cfg.abs_error_tol, 2e-3);
  bool exhausted = false;
  while (hi - lo > 5e-2) {
    const double mid = 0.5 * (lo + hi);
    const double p = exceedance(mid, shape, model, gamma, coarse, nullptr, &exhausted);
    (p > alpha ? lo : hi) = mid;
  }

  QmcConfig fine = cfg;
  fine.abs_error_tol = std::min(cfg.abs_error_tol, 2.5e-4);
  exhausted = false;
  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    double err = 0;
    bool starved = false;
    const double p = exceedance(mid, shape, model, gamma, fine, &err, &starved);
    exhausted |= starved;
    // a defect below integration noise pins the root, but only counts when
    // the integrator actually reached its tolerance
    if (!starved && std::abs(p - alpha) < err) return mid;
    (p > alpha ? lo : hi) = mid;
  }
  if (exhausted) throw BudgetExhausted();
  return 0.5 * (lo + hi);
}

}  // namespace

Eigen::VectorXd noncentrality(StatKind kind, const Eigen::VectorXd& mu, double sigma2,
                              const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes) {
  if (sigma2 <= 0) throw DegenerateVariance();
  if (c.cols() != mu.size() || c.cols() != inv_sizes.size()) {
    throw DimensionMismatch("contrast, mean, and group-size dimensions disagree");
  }
  const Eigen::VectorXd num = c.coef * mu;
  const Eigen::MatrixXd d = inv_sizes.asDiagonal();
  Eigen::VectorXd den(c.rows());
  for (Eigen::Index k = 0; k < c.rows(); ++k) {
    const auto row = c.coef.row(k);
    switch (kind) {
      case StatKind::t_like:
        den(k) = std::sqrt(sigma2 * (row * d * row.transpose())(0));
        break;
      case StatKind::s_like:
        den(k) = std::sqrt(sigma2 * row.squaredNorm());
        break;
      case StatKind::m_like:
        den(k) = row.norm();
        break;
    }
  }
  return num.cwiseQuotient(den);
}

double critical_u(double alpha, const CovarianceModel& sigma_t, double gamma,
                  const QmcConfig& cfg) {
  const Eigen::VectorXd shape = Eigen::VectorXd::Ones(sigma_t.sigma.rows());
  return solve_critical(alpha, shape, sigma_t, gamma, cfg);
}

std::pair<double, Eigen::VectorXd> critical_v(double alpha, const ContrastMatrix& c,
                                              const Eigen::VectorXd& inv_sizes,
                                              double gamma, const QmcConfig& cfg) {
  const Eigen::VectorXd k_inv = k_inv_vector(c, inv_sizes);
  const CovarianceModel model = sigma_T(c, inv_sizes);
  const double v = solve_critical(alpha, k_inv, model, gamma, cfg);
  return {v, k_inv};
}

CriticalValues critical_values(double alpha, const ContrastMatrix& c,
                               const Eigen::VectorXd& inv_sizes, double gamma,
                               const QmcConfig& cfg) {
  CriticalValues out;
  const CovarianceModel model = sigma_T(c, inv_sizes);
  out.u_alpha = critical_u(alpha, model, gamma, cfg);
  auto [v, k_inv] = critical_v(alpha, c, inv_sizes, gamma, cfg);
  out.v_alpha = v;
  out.k_inv = std::move(k_inv);
  out.thresholds_T = Eigen::VectorXd::Constant(c.rows(), out.u_alpha);
  out.thresholds_S = out.k_inv * out.v_alpha;
  return out;
}

PowerResult power_at_thresholds(const CovarianceModel& sigma, double gamma,
                                const Eigen::VectorXd& lambda,
                                const Eigen::VectorXd& thresholds, StatKind kind,
                                const QmcConfig& cfg) {
  const ProbEstimate est = mvt_cdf(thresholds, sigma, gamma, lambda, cfg);
  PowerResult out;
  out.beta = std::clamp(1.0 - est.value, 0.0, 1.0);
  out.est_error = est.est_error;
  out.kind = kind;
  return out;
}

PowerResult power_T(const Eigen::VectorXd& mu, double sigma2, const ContrastMatrix& c,
                    const Eigen::VectorXd& inv_sizes, double gamma, double alpha,
                    const QmcConfig& cfg) {
  const CovarianceModel model = sigma_T(c, inv_sizes);
  const double u = critical_u(alpha, model, gamma, cfg);
  const Eigen::VectorXd lambda = noncentrality(StatKind::t_like, mu, sigma2, c, inv_sizes);
  const Eigen::VectorXd thresholds = Eigen::VectorXd::Constant(c.rows(), u);
  return power_at_thresholds(model, gamma, lambda, thresholds, StatKind::t_like, cfg);
}

PowerResult power_S(const Eigen::VectorXd& mu, double sigma2, const ContrastMatrix& c,
                    const Eigen::VectorXd& inv_sizes, double gamma, double alpha,
                    const QmcConfig& cfg) {
  const auto [v, k_inv] = critical_v(alpha, c, inv_sizes, gamma, cfg);
  const CovarianceModel model = sigma_T(c, inv_sizes);
  const Eigen::VectorXd lambda = noncentrality(StatKind::t_like, mu, sigma2, c, inv_sizes);
  return power_at_thresholds(model, gamma, lambda, k_inv * v, StatKind::s_like, cfg);
}

int priority_index(const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes) {
  const Eigen::VectorXd k_inv = k_inv_vector(c, inv_sizes);
  int best = 0;
  for (int k = 1; k < k_inv.size(); ++k) {
    if (k_inv(k) < k_inv(best)) best = k;
  }
  return best + 1;
}

RtpEstimate r_tp(StatKind kind, int k_true, double delta, double sigma2,
                 const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes,
                 double gamma, double alpha, std::size_t mc_count,
                 std::uint64_t seed, const QmcConfig& cfg) {
  if (k_true < 1 || k_true > c.rows()) {
    throw DimensionMismatch("k_true out of range");
  }
  const Eigen::VectorXd mu = delta * c.coef.row(k_true - 1).transpose();
  double critical = 0;
  CovarianceModel model;
  switch (kind) {
    case StatKind::t_like:
      model = sigma_T(c, inv_sizes);
      critical = critical_u(alpha, model, gamma, cfg);
      break;
    case StatKind::s_like: {
      model = sigma_S(c, inv_sizes);
      critical = critical_v(alpha, c, inv_sizes, gamma, cfg).first;
      break;
    }
    case StatKind::m_like:
      throw Error("r_tp is defined for the T and S statistics only");
  }
  const Eigen::VectorXd lambda = noncentrality(kind, mu, sigma2, c, inv_sizes);
  return r_tp_at(kind, model, gamma, lambda, critical, k_true, mc_count, seed);
}

RtpEstimate r_tp_at(StatKind kind, const CovarianceModel& sigma, double gamma,
                    const Eigen::VectorXd& lambda, double critical, int k_true,
                    std::size_t mc_count, std::uint64_t seed) {
  const Eigen::MatrixXd draws =
      sample_statistics(kind, sigma, gamma, lambda, mc_count, seed);
  std::size_t hits = 0;
  const Eigen::Index want = k_true - 1;
  for (Eigen::Index i = 0; i < draws.rows(); ++i) {
    Eigen::Index argmax = 0;
    const double max = draws.row(i).maxCoeff(&argmax);
    if (max >= critical && argmax == want) ++hits;
  }
  RtpEstimate out;
  out.draws = mc_count;
  out.value = static_cast<double>(hits) / static_cast<double>(mc_count);
  out.std_error = std::sqrt(out.value * (1.0 - out.value) / static_cast<double>(mc_count));
  return out;
}

}  // namespace maxcontrast
