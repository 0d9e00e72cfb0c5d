#include "maxcontrast/tests.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "maxcontrast/rng.hpp"

namespace maxcontrast {

namespace {

// c diag(w) c' for weight vector w
Eigen::MatrixXd weighted_gram(const ContrastMatrix& c, const Eigen::VectorXd& w) {
  if (c.cols() != w.size()) {
    throw DimensionMismatch("contrast matrix has " + std::to_string(c.cols()) +
                            " columns but the weight vector has " +
                            std::to_string(w.size()) + " entries");
  }
  return c.coef * w.asDiagonal() * c.coef.transpose();
}

Eigen::MatrixXd correlation_from(const Eigen::MatrixXd& gram,
                                 const Eigen::VectorXd& scale2) {
  const Eigen::VectorXd s = scale2.cwiseSqrt();
  Eigen::MatrixXd out = gram;
  const Eigen::Index m = gram.rows();
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index l = 0; l < m; ++l) {
      out(k, l) /= s(k) * s(l);
    }
  }
  return out;
}

StatisticVector make_statistic(const Eigen::VectorXd& values, Method method) {
  StatisticVector out;
  out.values = values;
  out.method = method;
  int best = 0;
  for (int k = 1; k < values.size(); ++k) {
    if (values(k) > values(best)) best = k;
  }
  out.argmax = best + 1;
  out.max_value = values(best);
  return out;
}

// Shared tail machinery for the parametric contrast tests. build_sigma maps
// the effective contrast matrix to the null covariance of the statistic.
template <typename ComputeStat, typename BuildSigma>
TestResult contrast_test(const GroupedDataset& ds, const ContrastMatrix& c,
                         const QmcConfig& cfg, Tail tail, Method method,
                         ComputeStat&& compute_stat, BuildSigma&& build_sigma) {
  validate_contrasts(c);
  const GroupSummary summary = summarize(ds);
  if (c.cols() != summary.means.size()) {
    throw DimensionMismatch("contrast matrix has " + std::to_string(c.cols()) +
                            " columns but the dataset has " +
                            std::to_string(summary.means.size()) + " groups");
  }
  const ContrastMatrix eff = tail == Tail::two ? augment_two_sided(c) : c;
  const StatisticVector stat = compute_stat(summary, eff);

  const CovarianceModel model = build_sigma(eff, summary);
  const Eigen::VectorXd upper = Eigen::VectorXd::Constant(eff.rows(), stat.max_value);
  const Eigen::VectorXd delta = Eigen::VectorXd::Zero(eff.rows());
  const ProbEstimate est =
      mvt_cdf(upper, model, static_cast<double>(summary.dof), delta, cfg);

  TestResult res;
  res.statistic = stat;
  res.statistic.method = method;
  res.p_value = std::clamp(1.0 - est.value, 0.0, 1.0);
  res.p_error = est.est_error;
  const int row = stat.argmax - 1;
  const int m = static_cast<int>(c.rows());
  res.selected_pattern = row % m + 1;
  res.selected_direction = row < m ? +1 : -1;
  res.selected_name = eff.name(row);
  res.budget_exhausted = est.budget_exhausted;
  return res;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::mcm:
      return "mcm";
    case Method::mmcm:
      return "mmcm";
    case Method::pmmcm:
      return "pmmcm";
    case Method::kw:
      return "kw";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  if (name == "mcm") return Method::mcm;
  if (name == "mmcm") return Method::mmcm;
  if (name == "pmmcm") return Method::pmmcm;
  if (name == "kw") return Method::kw;
  throw Error("unknown method '" + name + "'");
}

CovarianceModel sigma_T(const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes) {
  const Eigen::MatrixXd gram = weighted_gram(c, inv_sizes);
  return factorize(correlation_from(gram, gram.diagonal()));
}

CovarianceModel sigma_S(const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes) {
  const Eigen::MatrixXd gram = weighted_gram(c, inv_sizes);
  const Eigen::VectorXd norms2 = c.coef.rowwise().squaredNorm();
  return factorize(correlation_from(gram, norms2));
}

CovarianceModel sigma_M(const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes,
                        double sigma2) {
  if (sigma2 <= 0) throw DegenerateVariance();
  const Eigen::MatrixXd gram = weighted_gram(c, inv_sizes);
  const Eigen::VectorXd norms2 = c.coef.rowwise().squaredNorm();
  return factorize(sigma2 * correlation_from(gram, norms2));
}

StatisticVector compute_T(const GroupSummary& s, const ContrastMatrix& c) {
  if (s.pooled_variance <= 0) {
    throw ZeroVariance();
  }
  const Eigen::VectorXd num = c.coef * s.means;
  const Eigen::MatrixXd gram = weighted_gram(c, s.inv_sizes);
  const Eigen::VectorXd den =
      (s.pooled_variance * gram.diagonal()).cwiseSqrt();
  return make_statistic(num.cwiseQuotient(den), Method::mcm);
}

StatisticVector compute_S(const GroupSummary& s, const ContrastMatrix& c) {
  if (s.pooled_variance <= 0) {
    throw ZeroVariance();
  }
  if (c.cols() != s.means.size()) {
    throw DimensionMismatch("contrast/means dimension mismatch");
  }
  const Eigen::VectorXd num = c.coef * s.means;
  const Eigen::VectorXd den =
      (s.pooled_variance * c.coef.rowwise().squaredNorm()).cwiseSqrt();
  return make_statistic(num.cwiseQuotient(den), Method::mmcm);
}

StatisticVector compute_M(const Eigen::VectorXd& means, const ContrastMatrix& c) {
  if (c.cols() != means.size()) {
    throw DimensionMismatch("contrast/means dimension mismatch");
  }
  const Eigen::VectorXd num = c.coef * means;
  const Eigen::VectorXd den = c.coef.rowwise().norm();
  return make_statistic(num.cwiseQuotient(den), Method::pmmcm);
}

TestResult max_contrast_test(const GroupedDataset& ds, const ContrastMatrix& c,
                             const QmcConfig& cfg, Tail tail) {
  return contrast_test(
      ds, c, cfg, tail, Method::mcm,
      [](const GroupSummary& s, const ContrastMatrix& eff) { return compute_T(s, eff); },
      [](const ContrastMatrix& eff, const GroupSummary& s) {
        return sigma_T(eff, s.inv_sizes);
      });
}

TestResult modified_max_contrast_test(const GroupedDataset& ds, const ContrastMatrix& c,
                                      const QmcConfig& cfg, Tail tail) {
  return contrast_test(
      ds, c, cfg, tail, Method::mmcm,
      [](const GroupSummary& s, const ContrastMatrix& eff) { return compute_S(s, eff); },
      [](const ContrastMatrix& eff, const GroupSummary& s) {
        return sigma_S(eff, s.inv_sizes);
      });
}

TestResult permuted_modified_max_contrast_test(const GroupedDataset& ds,
                                               const ContrastMatrix& c,
                                               const PermutationConfig& cfg,
                                               Tail tail) {
  validate_contrasts(c);
  const int a = static_cast<int>(ds.group_count());
  if (c.cols() != a) {
    throw DimensionMismatch("contrast matrix has " + std::to_string(c.cols()) +
                            " columns but the dataset has " + std::to_string(a) +
                            " groups");
  }
  for (int i = 0; i < a; ++i) {
    if (ds.groups[i].empty()) throw EmptyGroup(i + 1);
  }

  const ContrastMatrix eff = tail == Tail::two ? augment_two_sided(c) : c;

  // Rows scaled by 1/|c_k| once so each resample is a single mat-vec.
  Eigen::MatrixXd w = eff.coef;
  for (Eigen::Index k = 0; k < w.rows(); ++k) w.row(k) /= w.row(k).norm();

  std::vector<double> pool;
  pool.reserve(ds.total_size());
  Eigen::VectorXd means(a);
  for (int i = 0; i < a; ++i) {
    double sum = 0;
    for (double v : ds.groups[i]) {
      pool.push_back(v);
      sum += v;
    }
    means(i) = sum / static_cast<double>(ds.groups[i].size());
  }
  const StatisticVector observed = make_statistic(w * means, Method::pmmcm);

  Rng rng(cfg.seed);
  const std::size_t n = pool.size();
  std::size_t count = 0;
  std::size_t r = 0;
  double p_hat = 0;
  double sigma_hat = kInf;
  bool resolved = false;
  while (r < cfg.n_resamp_max) {
    ++r;
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = rng.next_u64() % (i + 1);
      std::swap(pool[i], pool[j]);
    }
    std::size_t offset = 0;
    for (int i = 0; i < a; ++i) {
      const std::size_t ni = ds.groups[i].size();
      double sum = 0;
      for (std::size_t j = 0; j < ni; ++j) sum += pool[offset + j];
      means(i) = sum / static_cast<double>(ni);
      offset += ni;
    }
    if ((w * means).maxCoeff() > observed.max_value) ++count;

    p_hat = cfg.add_one
                ? static_cast<double>(count + 1) / static_cast<double>(r + 1)
                : static_cast<double>(count) / static_cast<double>(r);
    sigma_hat = std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(r));
    if (r > cfg.n_resamp_min && cfg.confidence_mult * sigma_hat < cfg.eps) {
      resolved = true;
      break;
    }
  }

  TestResult res;
  res.statistic = observed;
  res.p_value = p_hat;
  res.p_error = sigma_hat;
  res.resamples = r;
  res.count_exceed = count;
  res.budget_exhausted = !resolved;
  const int row = observed.argmax - 1;
  const int m = static_cast<int>(c.rows());
  res.selected_pattern = row % m + 1;
  res.selected_direction = row < m ? +1 : -1;
  res.selected_name = eff.name(row);
  return res;
}

TestResult kruskal_wallis_test(const GroupedDataset& ds) {
  const int a = static_cast<int>(ds.group_count());
  std::vector<std::pair<double, int>> obs;  // (value, group)
  obs.reserve(ds.total_size());
  int nonempty = 0;
  int first_empty = 0;
  for (int i = 0; i < a; ++i) {
    if (ds.groups[i].empty()) {
      if (first_empty == 0) first_empty = i + 1;
    } else {
      ++nonempty;
    }
    for (double v : ds.groups[i]) obs.emplace_back(v, i);
  }
  if (nonempty < 2) throw EmptyGroup(first_empty);
  const std::size_t n = obs.size();

  std::sort(obs.begin(), obs.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  if (obs.front().first == obs.back().first) {
    throw AllTied();
  }

  // Average ranks over tied runs, accumulating rank sums per group and the
  // tie-correction term sum(t^3 - t).
  std::vector<double> rank_sum(a, 0.0);
  double tie_term = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && obs[j + 1].first == obs[i].first) ++j;
    const double t = static_cast<double>(j - i + 1);
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) rank_sum[obs[k].second] += avg_rank;
    tie_term += t * t * t - t;
    i = j + 1;
  }

  const double dn = static_cast<double>(n);
  double h = 0;
  for (int g = 0; g < a; ++g) {
    if (ds.groups[g].empty()) continue;
    h += rank_sum[g] * rank_sum[g] / static_cast<double>(ds.groups[g].size());
  }
  h = 12.0 / (dn * (dn + 1.0)) * h - 3.0 * (dn + 1.0);
  h /= 1.0 - tie_term / (dn * dn * dn - dn);

  const boost::math::chi_squared chi2(nonempty - 1);
  TestResult res;
  res.statistic = make_statistic(Eigen::VectorXd::Constant(1, h), Method::kw);
  res.p_value = boost::math::cdf(boost::math::complement(chi2, std::max(h, 0.0)));
  res.p_error = 0;
  res.selected_pattern = 0;
  res.selected_name.clear();
  return res;
}

}  // namespace maxcontrast
