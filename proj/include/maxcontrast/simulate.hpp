#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "maxcontrast/core.hpp"
#include "maxcontrast/mvdist.hpp"
#include "maxcontrast/tests.hpp"

namespace maxcontrast {

enum class Pattern { additive, dominant, recessive, valley, null_pattern };

std::string pattern_name(Pattern p);
Pattern pattern_from_name(const std::string& name);

struct ScenarioConfig {
  double maf = 0.25;
  int n_total = 100;
  Pattern pattern = Pattern::null_pattern;
  double delta = 0;
  std::vector<Method> methods = {Method::mcm, Method::mmcm, Method::kw};
  std::size_t reps = 20000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  Tail tail = Tail::two;
  QmcConfig qmc;
  PermutationConfig perm;
  int threads = 0;  // 0 = hardware default
};

struct MethodMetrics {
  std::size_t n_p = 0;                    // rejections
  std::size_t n_tp = 0;                   // rejections selecting the true pattern
  std::vector<std::size_t> selected;      // per contrast row, among rejections
  double seconds = 0;

  double r_p_hat(std::size_t reps) const {
    return reps ? static_cast<double>(n_p) / static_cast<double>(reps) : 0.0;
  }
  double r_tp_hat(std::size_t reps) const {
    return reps ? static_cast<double>(n_tp) / static_cast<double>(reps) : 0.0;
  }
};

struct ScenarioMetrics {
  ScenarioConfig config;
  std::array<int, 3> sizes{};
  std::size_t reps = 0;
  std::map<Method, MethodMetrics> per_method;
};

struct BenchRow {
  std::string scenario;
  Method method = Method::mmcm;
  std::size_t reps = 0;
  double total_seconds = 0;
  double mean_resamples = 0;  // pMMCM only
};

// Table of Hardy-Weinberg group sizes: verbatim values for the eight
// tabulated (maf, n) pairs, largest-remainder rounding of
// ((1-q)^2, 2q(1-q), q^2)*n otherwise, q = maf.
std::array<int, 3> hwe_group_sizes(double maf, int n_total);

// Group means delta * c_i for the pattern's contrast vector; the valley
// pattern uses (1/3, -2/3, 1/3), the null pattern the zero vector.
Eigen::VectorXd pattern_means(Pattern pattern, double delta);

// Group i holds n_i draws from N(delta * c_i, 1) where c is the pattern's
// contrast row (zero vector for the null pattern).
GroupedDataset generate_dataset(Pattern pattern, double delta,
                                const std::array<int, 3>& sizes, std::uint64_t seed);

ScenarioMetrics run_scenario(const ScenarioConfig& cfg);

// Wall-clock totals over reps runs per (scenario, method); single-threaded,
// full per-replicate p-values for both methods.
std::vector<BenchRow> bench_timing(const std::vector<ScenarioConfig>& scenarios,
                                   std::size_t reps);

}  // namespace maxcontrast
