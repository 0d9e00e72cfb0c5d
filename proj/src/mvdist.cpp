#include "maxcontrast/mvdist.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "maxcontrast/rng.hpp"

namespace maxcontrast {

namespace {

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

inline double phi_cdf(double x) {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

inline double phi_inv(double p) { return boost::math::quantile(kStdNormal, p); }

// first primes, square roots feed the Kronecker sequence
constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                           43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101,
                           103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
                           157, 163, 167, 173, 179, 181, 191, 193, 197, 199,
                           211, 223, 227, 229, 233, 239, 241, 251};

constexpr int kShifts = 12;

inline double frac(double x) { return x - std::floor(x); }

// Chi-square mixing factor s(u) = sqrt(quantile(chi2_nu, u) / nu). The
// quantile dominates the cost of every integrand evaluation and every draw,
// and all of them at a given nu walk the same smooth monotone curve, so a
// one-time cubic Hermite table over the bulk of (0, 1) stands in for almost
// all quantile calls. Tail regions fall back to the exact quantile where the
// curve steepens; the table itself is built from the exact values.
class ChiMixCurve {
 public:
  explicit ChiMixCurve(double nu) : nu_(nu), chi_(nu) {
    step_ = (kHi - kLo) / kCells;
    value_.resize(kCells + 1);
    slope_.resize(kCells + 1);
    for (int i = 0; i <= kCells; ++i) {
      const double u = kLo + step_ * static_cast<double>(i);
      const double q = boost::math::quantile(chi_, u);
      const double s = std::sqrt(q / nu_);
      value_[static_cast<std::size_t>(i)] = s;
      slope_[static_cast<std::size_t>(i)] =
          step_ / (2.0 * nu_ * s * boost::math::pdf(chi_, q));
    }
  }

  double operator()(double u) const {
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);
    if (u <= kLo || u >= kHi)
      return std::sqrt(boost::math::quantile(chi_, u) / nu_);
    const double x = (u - kLo) / step_;
    int cell = static_cast<int>(x);
    if (cell >= kCells) cell = kCells - 1;
    const double t = x - static_cast<double>(cell);
    const std::size_t c = static_cast<std::size_t>(cell);
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * value_[c] + (t3 - 2 * t2 + t) * slope_[c] +
           (3 * t2 - 2 * t3) * value_[c + 1] + (t3 - t2) * slope_[c + 1];
  }

 private:
  static constexpr double kLo = 1.0 / 128.0;
  static constexpr double kHi = 1.0 - 1.0 / 128.0;
  static constexpr int kCells = 2048;
  double nu_;
  boost::math::chi_squared_distribution<double> chi_;
  double step_;
  std::vector<double> value_;   // s at the grid nodes
  std::vector<double> slope_;   // ds/du at the nodes, scaled by the step
};

std::shared_ptr<const ChiMixCurve> chi_mix_curve(double nu) {
  static std::mutex gate;
  static std::map<double, std::shared_ptr<const ChiMixCurve>> cache;
  const std::lock_guard<std::mutex> lock(gate);
  auto& slot = cache[nu];
  if (!slot) slot = std::make_shared<ChiMixCurve>(nu);
  return slot;
}

}  // namespace

double normal_draw(Rng& rng) { return phi_inv(rng.next_uniform()); }

CovarianceModel factorize(const Eigen::MatrixXd& sigma, double tol) {
  const Eigen::Index m = sigma.rows();
  if (sigma.cols() != m) throw NotSymmetric();
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw NotSymmetric();

  Eigen::MatrixXd a = sigma;          // working copy, permuted in place
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);

  const double ref = std::max(a.diagonal().maxCoeff(), 0.0);
  const double cut = tol * std::max(ref, 1e-300);

  int rank = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    // greatest residual variance pivots next
    Eigen::Index p = j;
    for (Eigen::Index i = j + 1; i < m; ++i)
      if (a(i, i) > a(p, p)) p = i;
    if (a(p, p) < -cut) throw IndefiniteMatrix();
    if (a(p, p) <= cut) {
      // remaining mass is numerically zero; make sure nothing is negative
      for (Eigen::Index i = j; i < m; ++i)
        if (a(i, i) < -cut) throw IndefiniteMatrix();
      break;
    }
    if (p != j) {
      a.row(j).swap(a.row(p));
      a.col(j).swap(a.col(p));
      l.row(j).swap(l.row(p));
      std::swap(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(p)]);
    }
    const double ljj = std::sqrt(a(j, j));
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < m; ++i) l(i, j) = a(i, j) / ljj;
    for (Eigen::Index i = j + 1; i < m; ++i)
      for (Eigen::Index k = j + 1; k <= i; ++k) {
        a(i, k) -= l(i, j) * l(k, j);
        a(k, i) = a(i, k);
      }
    rank = static_cast<int>(j) + 1;
  }

  CovarianceModel model;
  model.sigma = sigma;
  model.rank = rank;
  model.factor = Eigen::MatrixXd::Zero(m, rank);
  model.pivot_order.resize(static_cast<std::size_t>(rank));
  for (Eigen::Index i = 0; i < m; ++i)
    model.factor.row(perm[static_cast<std::size_t>(i)]) = l.row(i).head(rank);
  for (int j = 0; j < rank; ++j)
    model.pivot_order[static_cast<std::size_t>(j)] = perm[static_cast<std::size_t>(j)];

  // scrub roundoff so the support of each row is unambiguous
  for (Eigen::Index i = 0; i < m; ++i) {
    const double rs = std::sqrt(std::max(sigma(i, i), 0.0));
    for (Eigen::Index j = 0; j < rank; ++j)
      if (std::abs(model.factor(i, j)) < 1e-13 * std::max(rs, 1e-300))
        model.factor(i, j) = 0.0;
  }
  return model;
}

namespace {

// Separation-of-variables integrand over the unit cube. Each QMC dimension j
// carries every constraint row whose support in the factor ends at column j;
// rows spanned by earlier columns fold in as interval bounds before z_j is
// drawn, so singular directions cost no extra dimensions. For the t case one
// leading coordinate drives the chi-square mixing.
struct SovProblem {
  Eigen::MatrixXd lmat;              // m x r factor
  Eigen::VectorXd upper;             // before mixing/shift
  Eigen::VectorXd delta;             // subtracted from the bounds
  double nu = 0;                     // 0 means no mixing (normal case)
  int rank = 0;
  std::vector<std::vector<int>> rows_at;  // per column: rows closing there
  std::vector<int> zero_rows;             // rows with no factor support
  std::shared_ptr<const ChiMixCurve> mix;

  int qmc_dims() const { return rank + (nu > 0 ? 1 : 0); }

  double evaluate(const double* u) const {
    double srt = 1.0;
    int base = 0;
    if (nu > 0) {
      srt = (*mix)(u[0]);
      base = 1;
    }
    for (int i : zero_rows) {
      const double b = upper[i] == kInf ? kInf : upper[i] * srt - delta[i];
      if (b < 0) return 0.0;
    }
    double prob = 1.0;
    double z[64];
    for (int j = 0; j < rank; ++j) {
      double zlo = -kInf, zhi = kInf;
      for (int i : rows_at[static_cast<std::size_t>(j)]) {
        const double b = upper[i] == kInf ? kInf : upper[i] * srt - delta[i];
        double partial = 0;
        for (int k = 0; k < j; ++k) partial += lmat(i, k) * z[k];
        const double g = (b - partial) / lmat(i, j);
        if (lmat(i, j) > 0) {
          if (g < zhi) zhi = g;
        } else {
          if (g > zlo) zlo = g;
        }
      }
      const double d = phi_cdf(zlo);
      const double e = phi_cdf(zhi);
      if (e <= d) return 0.0;
      prob *= e - d;
      // the interpolant can round onto 0 or 1 when the interval sits deep in a
      // tail; keep the quantile argument strictly inside (0, 1)
      const double w =
          std::clamp(d + u[base + j] * (e - d), 1e-100, 1.0 - 1e-16);
      z[j] = phi_inv(w);
    }
    return prob;
  }
};

SovProblem build_problem(const Eigen::VectorXd& upper, const CovarianceModel& cov,
                         double nu, const Eigen::VectorXd& shift) {
  const Eigen::Index m = cov.sigma.rows();
  if (upper.size() != m || shift.size() != m)
    throw DimensionMismatch("bound/shift length does not match covariance order");
  SovProblem p;
  p.lmat = cov.factor;
  p.upper = upper;
  p.delta = shift;
  p.nu = nu;
  if (nu > 0) p.mix = chi_mix_curve(nu);
  p.rank = cov.rank;
  p.rows_at.assign(static_cast<std::size_t>(std::max(cov.rank, 1)), {});
  for (Eigen::Index i = 0; i < m; ++i) {
    int last = -1;
    for (int j = cov.rank - 1; j >= 0; --j)
      if (p.lmat(i, j) != 0.0) { last = j; break; }
    if (last < 0)
      p.zero_rows.push_back(static_cast<int>(i));
    else
      p.rows_at[static_cast<std::size_t>(last)].push_back(static_cast<int>(i));
  }
  return p;
}

ProbEstimate integrate(const SovProblem& problem, const QmcConfig& cfg) {
  const int dims = problem.qmc_dims();
  ProbEstimate out;
  if (dims == 0) {
    // nothing stochastic left; single evaluation decides
    double u0 = 0.5;
    out.value = problem.evaluate(&u0);
    out.points_used = 1;
    return out;
  }

  double root[64];
  for (int j = 0; j < dims; ++j)
    root[j] = frac(std::sqrt(static_cast<double>(kPrimes[j])));

  double offset[kShifts][64];
  for (int q = 0; q < kShifts; ++q) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(q) + 1);
    for (int j = 0; j < dims; ++j) offset[q][j] = rng.next_uniform();
  }

  const std::size_t per_shift_cap =
      std::max<std::size_t>(cfg.max_points / kShifts, 32);
  double sums[kShifts] = {0};
  std::size_t n = 0;
  std::size_t block = 256;

  for (;;) {
    const std::size_t target = std::min(n + block, per_shift_cap);
    for (std::size_t k = n; k < target; ++k) {
      const double kk = static_cast<double>(k + 1);
      for (int q = 0; q < kShifts; ++q) {
        double u[64];
        for (int j = 0; j < dims; ++j) {
          const double t = frac(kk * root[j] + offset[q][j]);
          u[j] = std::abs(2.0 * t - 1.0);  // baker fold keeps the rule unbiased
        }
        sums[q] += problem.evaluate(u);
      }
    }
    n = target;

    double mean = 0;
    for (int q = 0; q < kShifts; ++q) mean += sums[q] / static_cast<double>(n);
    mean /= kShifts;
    double var = 0;
    for (int q = 0; q < kShifts; ++q) {
      const double d = sums[q] / static_cast<double>(n) - mean;
      var += d * d;
    }
    var /= (kShifts - 1);
    const double err = cfg.confidence_mult * std::sqrt(var / kShifts);

    out.value = std::clamp(mean, 0.0, 1.0);
    out.est_error = err;
    out.points_used = n * kShifts;
    if (err <= cfg.abs_error_tol) return out;
    if (n >= per_shift_cap) {
      out.budget_exhausted = true;
      return out;
    }
    block = n;  // double
  }
}

}  // namespace

ProbEstimate mvt_cdf(const Eigen::VectorXd& upper, const CovarianceModel& cov,
                     double nu, const Eigen::VectorXd& delta, const QmcConfig& cfg) {
  if (nu < 1) throw DimensionMismatch("degrees of freedom must be >= 1");
  return integrate(build_problem(upper, cov, nu, delta), cfg);
}

ProbEstimate mvn_cdf(const Eigen::VectorXd& upper, const CovarianceModel& cov,
                     const Eigen::VectorXd& mean, const QmcConfig& cfg) {
  return integrate(build_problem(upper, cov, 0.0, mean), cfg);
}

double mvt_null_density(const Eigen::VectorXd& s, const CovarianceModel& cov,
                        double gamma) {
  const Eigen::Index m = cov.sigma.rows();
  if (cov.rank < m) throw SingularSigma();
  if (s.size() != m) throw DimensionMismatch("point length does not match covariance order");

  // solve L y = s, so s' Sigma^-1 s = |y|^2 and log|Sigma| = 2*sum(log diag in pivot order)
  Eigen::MatrixXd lp(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    lp.row(i) = cov.factor.row(cov.pivot_order[static_cast<std::size_t>(i)]);
  Eigen::VectorXd sp(m);
  for (Eigen::Index i = 0; i < m; ++i)
    sp[i] = s[cov.pivot_order[static_cast<std::size_t>(i)]];
  const Eigen::VectorXd y =
      lp.triangularView<Eigen::Lower>().solve(sp);
  double logdet = 0;
  for (Eigen::Index i = 0; i < m; ++i) logdet += 2.0 * std::log(lp(i, i));

  const double md = static_cast<double>(m);
  const double q = y.squaredNorm();
  const double lognum = boost::math::lgamma((md + gamma) / 2.0);
  const double logden = boost::math::lgamma(gamma / 2.0) +
                        (md / 2.0) * std::log(M_PI * gamma) + 0.5 * logdet;
  return std::exp(lognum - logden - (md + gamma) / 2.0 * std::log1p(q / gamma));
}

Eigen::MatrixXd sample_statistics(StatKind kind, const CovarianceModel& cov,
                                  double gamma, const Eigen::VectorXd& lambda,
                                  std::size_t count, std::uint64_t seed) {
  const Eigen::Index m = cov.sigma.rows();
  if (lambda.size() != m)
    throw DimensionMismatch("noncentrality length does not match covariance order");
  const bool mixed = kind != StatKind::m_like;
  std::shared_ptr<const ChiMixCurve> mix;
  if (mixed) mix = chi_mix_curve(gamma);

  Eigen::MatrixXd draws(static_cast<Eigen::Index>(count), m);
  Eigen::VectorXd z(cov.rank);
  for (std::size_t row = 0; row < count; ++row) {
    Rng rng(seed, row);
    for (int j = 0; j < cov.rank; ++j) z[j] = normal_draw(rng);
    Eigen::VectorXd x = cov.factor * z + lambda;
    if (mixed) x /= (*mix)(rng.next_uniform());
    draws.row(static_cast<Eigen::Index>(row)) = x;
  }
  return draws;
}

}  // namespace maxcontrast
