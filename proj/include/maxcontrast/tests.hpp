#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "maxcontrast/core.hpp"
#include "maxcontrast/mvdist.hpp"

namespace maxcontrast {

enum class Method { mcm, mmcm, pmmcm, kw };
enum class Tail { one, two };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct StatisticVector {
  Eigen::VectorXd values;
  double max_value = 0;
  int argmax = 0;  // 1-based, smallest index on ties
  Method method = Method::mcm;
};

struct TestResult {
  StatisticVector statistic;
  double p_value = 1;
  double p_error = 0;
  int selected_pattern = 0;       // 1-based row of the original contrast matrix; 0 = none
  int selected_direction = +1;    // -1 when a negated row won under two-sided testing
  std::string selected_name;
  std::size_t resamples = 0;      // permutation only: r
  std::size_t count_exceed = 0;   // permutation only: COUNT
  bool budget_exhausted = false;
};

struct PermutationConfig {
  std::size_t n_resamp_min = 1000;
  std::size_t n_resamp_max = 100000;
  double eps = 1e-3;
  double confidence_mult = 3.5;
  std::uint64_t seed = 0;
  bool add_one = false;  // (COUNT+1)/(r+1) smoothing
};

// Covariance matrices of the statistic vectors. inv_sizes holds 1/n_i.
CovarianceModel sigma_T(const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes);
CovarianceModel sigma_S(const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes);
CovarianceModel sigma_M(const ContrastMatrix& c, const Eigen::VectorXd& inv_sizes,
                        double sigma2);

StatisticVector compute_T(const GroupSummary& s, const ContrastMatrix& c);
StatisticVector compute_S(const GroupSummary& s, const ContrastMatrix& c);
StatisticVector compute_M(const Eigen::VectorXd& means, const ContrastMatrix& c);

TestResult max_contrast_test(const GroupedDataset& ds, const ContrastMatrix& c,
                             const QmcConfig& cfg, Tail tail = Tail::one);
TestResult modified_max_contrast_test(const GroupedDataset& ds, const ContrastMatrix& c,
                                      const QmcConfig& cfg, Tail tail = Tail::one);
TestResult permuted_modified_max_contrast_test(const GroupedDataset& ds,
                                               const ContrastMatrix& c,
                                               const PermutationConfig& cfg,
                                               Tail tail = Tail::one);
TestResult kruskal_wallis_test(const GroupedDataset& ds);

}  // namespace maxcontrast
