#include "maxcontrast/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <utility>

#include "maxcontrast/power.hpp"
#include "maxcontrast/rng.hpp"

namespace maxcontrast {

namespace {

constexpr double k13 = 1.0 / 3.0;
constexpr double k23 = 2.0 / 3.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int pattern_row(Pattern p) {
  // 1-based row in the default contrast matrix; 0 when the pattern is not a
  // candidate there (valley, null).
  switch (p) {
    case Pattern::additive:
      return 1;
    case Pattern::dominant:
      return 2;
    case Pattern::recessive:
      return 3;
    default:
      return 0;
  }
}

struct ScenarioPlan {
  std::array<int, 3> sizes{};
  double gamma = 0;
  ContrastMatrix contrasts;       // default 3-row matrix
  ContrastMatrix effective;       // augmented when tail == two
  bool want_mcm = false, want_mmcm = false, want_pmmcm = false, want_kw = false;
  double t_critical = 0;          // max T threshold
  double s_critical = 0;          // max S threshold
  int true_row = 0;               // 1-based, 0 if none
};

ScenarioPlan make_plan(const ScenarioConfig& cfg) {
  ScenarioPlan plan;
  plan.sizes = hwe_group_sizes(cfg.maf, cfg.n_total);
  for (int i = 0; i < 3; ++i) {
    if (plan.sizes[i] == 0) throw EmptyGroup(i + 1);
  }
  plan.gamma = static_cast<double>(cfg.n_total - 3);
  plan.contrasts = default_pg_contrasts();
  plan.effective = cfg.tail == Tail::two ? augment_two_sided(plan.contrasts)
                                         : plan.contrasts;
  for (Method m : cfg.methods) {
    switch (m) {
      case Method::mcm:
        plan.want_mcm = true;
        break;
      case Method::mmcm:
        plan.want_mmcm = true;
        break;
      case Method::pmmcm:
        plan.want_pmmcm = true;
        break;
      case Method::kw:
        plan.want_kw = true;
        break;
    }
  }
  Eigen::VectorXd inv_sizes(3);
  for (int i = 0; i < 3; ++i) inv_sizes(i) = 1.0 / plan.sizes[i];
  if (plan.want_mcm) {
    plan.t_critical =
        critical_u(cfg.alpha, sigma_T(plan.effective, inv_sizes), plan.gamma, cfg.qmc);
  }
  if (plan.want_mmcm) {
    plan.s_critical =
        critical_u(cfg.alpha, sigma_S(plan.effective, inv_sizes), plan.gamma, cfg.qmc);
  }
  plan.true_row = pattern_row(cfg.pattern);
  return plan;
}

// Threshold-rule rejection shared by MCM and MMCM in the harness: reject when
// the max component clears the scenario's critical value, record the argmax
// row, and credit a true positive when the positive-direction row of the
// generating pattern wins (those rows come first in the augmented matrix).
void tally_threshold(const StatisticVector& stat, double critical, int true_row,
                     MethodMetrics& mm) {
  if (stat.max_value < critical) return;
  ++mm.n_p;
  const int row = stat.argmax - 1;
  ++mm.selected[static_cast<std::size_t>(row)];
  if (true_row > 0 && row == true_row - 1) ++mm.n_tp;
}

}  // namespace

std::string pattern_name(Pattern p) {
  switch (p) {
    case Pattern::additive:
      return "additive";
    case Pattern::dominant:
      return "dominant";
    case Pattern::recessive:
      return "recessive";
    case Pattern::valley:
      return "valley";
    case Pattern::null_pattern:
      return "null";
  }
  return "unknown";
}

Pattern pattern_from_name(const std::string& name) {
  if (name == "additive") return Pattern::additive;
  if (name == "dominant") return Pattern::dominant;
  if (name == "recessive") return Pattern::recessive;
  if (name == "valley") return Pattern::valley;
  if (name == "null") return Pattern::null_pattern;
  throw Error("unknown pattern '" + name + "'");
}

Eigen::VectorXd pattern_means(Pattern pattern, double delta) {
  Eigen::VectorXd c(3);
  switch (pattern) {
    case Pattern::additive:
      c << -0.5, 0.0, 0.5;
      break;
    case Pattern::dominant:
      c << -k13, -k13, k23;
      break;
    case Pattern::recessive:
      c << -k23, k13, k13;
      break;
    case Pattern::valley:
      c << k13, -k23, k13;
      break;
    case Pattern::null_pattern:
      c.setZero();
      break;
  }
  return delta * c;
}

std::array<int, 3> hwe_group_sizes(double maf, int n_total) {
  if (!(maf > 0 && maf <= 0.5)) {
    throw Error("minor allele frequency must lie in (0, 0.5], got " +
                std::to_string(maf));
  }
  if (n_total < 1) throw Error("n_total must be positive");

  struct TableEntry {
    double maf;
    int n;
    std::array<int, 3> sizes;
  };
  // Published sample-size pairs, kept verbatim: the source table's rounding of
  // the expected counts is not reproducible by any single rounding rule.
  static constexpr TableEntry table[] = {
      {0.12, 100, {78, 20, 2}},   {0.12, 300, {234, 61, 5}},
      {0.25, 100, {56, 37, 7}},   {0.25, 300, {168, 113, 19}},
      {0.33, 100, {44, 44, 12}},  {0.33, 300, {133, 133, 34}},
      {0.50, 100, {25, 50, 25}},  {0.50, 300, {75, 150, 75}},
  };
  for (const TableEntry& e : table) {
    if (n_total == e.n && std::abs(maf - e.maf) < 1e-12) return e.sizes;
  }

  const double q = maf;
  const double p = 1.0 - q;
  const std::array<double, 3> expected = {p * p * n_total, 2 * p * q * n_total,
                                          q * q * n_total};
  std::array<int, 3> sizes{};
  std::array<std::pair<double, int>, 3> remainder{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = static_cast<int>(std::floor(expected[i]));
    assigned += sizes[i];
    remainder[i] = {expected[i] - sizes[i], i};
  }
  std::sort(remainder.begin(), remainder.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  for (int k = 0; k < n_total - assigned; ++k) ++sizes[remainder[k % 3].second];
  return sizes;
}

GroupedDataset generate_dataset(Pattern pattern, double delta,
                                const std::array<int, 3>& sizes, std::uint64_t seed) {
  const Eigen::VectorXd means = pattern_means(pattern, delta);
  Rng rng(seed);
  GroupedDataset ds;
  ds.scale = Scale::log;
  ds.groups.resize(3);
  for (int i = 0; i < 3; ++i) {
    ds.groups[i].reserve(static_cast<std::size_t>(sizes[i]));
    for (int j = 0; j < sizes[i]; ++j) {
      ds.groups[i].push_back(means(i) + normal_draw(rng));
    }
  }
  return ds;
}

ScenarioMetrics run_scenario(const ScenarioConfig& cfg) {
  const ScenarioPlan plan = make_plan(cfg);

  ScenarioMetrics out;
  out.config = cfg;
  out.sizes = plan.sizes;
  out.reps = cfg.reps;

  const std::size_t rows_eff = static_cast<std::size_t>(plan.effective.rows());
  for (Method m : cfg.methods) {
    MethodMetrics mm;
    mm.selected.assign(m == Method::kw ? 0 : rows_eff, 0);
    out.per_method.emplace(m, std::move(mm));
  }
  if (cfg.reps == 0) return out;

  int threads = cfg.threads;
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
  }
  threads = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(threads), cfg.reps));

  struct Local {
    std::map<Method, MethodMetrics> per_method;
    std::exception_ptr failure;
  };
  std::vector<Local> locals(static_cast<std::size_t>(threads));

  auto worker = [&](std::size_t begin, std::size_t end, Local& local) {
    for (Method m : cfg.methods) {
      MethodMetrics mm;
      mm.selected.assign(m == Method::kw ? 0 : rows_eff, 0);
      local.per_method.emplace(m, std::move(mm));
    }
    std::size_t rep = begin;
    try {
      for (; rep < end; ++rep) {
        const std::uint64_t ds_seed = Rng::mix(cfg.seed, rep);
        const GroupedDataset ds =
            generate_dataset(cfg.pattern, cfg.delta, plan.sizes, ds_seed);

        GroupSummary summary;
        if (plan.want_mcm || plan.want_mmcm) summary = summarize(ds);

        if (plan.want_mcm) {
          MethodMetrics& mm = local.per_method.at(Method::mcm);
          const auto t0 = Clock::now();
          const StatisticVector t = compute_T(summary, plan.effective);
          tally_threshold(t, plan.t_critical, plan.true_row, mm);
          mm.seconds += seconds_since(t0);
        }
        if (plan.want_mmcm) {
          MethodMetrics& mm = local.per_method.at(Method::mmcm);
          const auto t0 = Clock::now();
          const StatisticVector s = compute_S(summary, plan.effective);
          tally_threshold(s, plan.s_critical, plan.true_row, mm);
          mm.seconds += seconds_since(t0);
        }
        if (plan.want_pmmcm) {
          MethodMetrics& mm = local.per_method.at(Method::pmmcm);
          PermutationConfig pc = cfg.perm;
          pc.seed = Rng::mix(ds_seed, 1);
          const auto t0 = Clock::now();
          const TestResult res = permuted_modified_max_contrast_test(
              ds, plan.contrasts, pc, cfg.tail);
          if (res.p_value <= cfg.alpha) {
            ++mm.n_p;
            const int row = res.selected_pattern - 1 +
                            (res.selected_direction < 0
                                 ? static_cast<int>(plan.contrasts.rows())
                                 : 0);
            ++mm.selected[static_cast<std::size_t>(row)];
            if (plan.true_row > 0 && res.selected_direction > 0 &&
                res.selected_pattern == plan.true_row) {
              ++mm.n_tp;
            }
          }
          mm.seconds += seconds_since(t0);
        }
        if (plan.want_kw) {
          MethodMetrics& mm = local.per_method.at(Method::kw);
          const auto t0 = Clock::now();
          const TestResult res = kruskal_wallis_test(ds);
          if (res.p_value <= cfg.alpha) ++mm.n_p;
          mm.seconds += seconds_since(t0);
        }
      }
    } catch (const std::exception& e) {
      local.failure = std::make_exception_ptr(
          Error("scenario maf=" + std::to_string(cfg.maf) +
                " n=" + std::to_string(cfg.n_total) + " pattern=" +
                pattern_name(cfg.pattern) + " replicate " + std::to_string(rep) +
                ": " + e.what()));
    }
  };

  if (threads == 1) {
    worker(0, cfg.reps, locals[0]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    const std::size_t chunk = (cfg.reps + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t begin = std::min(cfg.reps, static_cast<std::size_t>(t) * chunk);
      const std::size_t end = std::min(cfg.reps, begin + chunk);
      pool.emplace_back(worker, begin, end, std::ref(locals[static_cast<std::size_t>(t)]));
    }
    for (std::thread& th : pool) th.join();
  }

  for (const Local& local : locals) {
    if (local.failure) std::rethrow_exception(local.failure);
    for (const auto& [method, mm] : local.per_method) {
      MethodMetrics& total = out.per_method.at(method);
      total.n_p += mm.n_p;
      total.n_tp += mm.n_tp;
      total.seconds += mm.seconds;
      for (std::size_t i = 0; i < mm.selected.size(); ++i) {
        total.selected[i] += mm.selected[i];
      }
    }
  }
  return out;
}

std::vector<BenchRow> bench_timing(const std::vector<ScenarioConfig>& scenarios,
                                   std::size_t reps) {
  std::vector<BenchRow> rows;
  if (reps == 0) return rows;

  const ContrastMatrix contrasts = default_pg_contrasts();
  for (const ScenarioConfig& cfg : scenarios) {
    const std::array<int, 3> sizes = hwe_group_sizes(cfg.maf, cfg.n_total);
    const std::string label = pattern_name(cfg.pattern) +
                              " delta=" + std::to_string(cfg.delta) +
                              " maf=" + std::to_string(cfg.maf) +
                              " n=" + std::to_string(cfg.n_total);

    std::vector<GroupedDataset> datasets;
    datasets.reserve(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      datasets.push_back(generate_dataset(cfg.pattern, cfg.delta, sizes,
                                          Rng::mix(cfg.seed, rep)));
    }

    for (Method method : cfg.methods) {
      BenchRow row;
      row.scenario = label;
      row.method = method;
      row.reps = reps;
      std::size_t total_resamples = 0;
      const auto t0 = Clock::now();
      for (std::size_t rep = 0; rep < reps; ++rep) {
        switch (method) {
          case Method::mcm:
            max_contrast_test(datasets[rep], contrasts, cfg.qmc, cfg.tail);
            break;
          case Method::mmcm:
            modified_max_contrast_test(datasets[rep], contrasts, cfg.qmc, cfg.tail);
            break;
          case Method::pmmcm: {
            PermutationConfig pc = cfg.perm;
            pc.seed = Rng::mix(Rng::mix(cfg.seed, rep), 1);
            total_resamples +=
                permuted_modified_max_contrast_test(datasets[rep], contrasts, pc,
                                                    cfg.tail)
                    .resamples;
            break;
          }
          case Method::kw:
            kruskal_wallis_test(datasets[rep]);
            break;
        }
      }
      row.total_seconds = seconds_since(t0);
      row.mean_resamples = method == Method::pmmcm
                               ? static_cast<double>(total_resamples) /
                                     static_cast<double>(reps)
                               : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace maxcontrast
