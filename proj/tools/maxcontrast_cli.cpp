// maxcontrast: per-SNP screening with maximum contrast tests, critical-value
// and power tables, and a Monte-Carlo harness for operating characteristics.
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "maxcontrast/core.hpp"
#include "maxcontrast/io.hpp"
#include "maxcontrast/power.hpp"
#include "maxcontrast/rng.hpp"
#include "maxcontrast/simulate.hpp"
#include "maxcontrast/tests.hpp"

namespace mc = maxcontrast;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitBudget = 3;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Writes to stdout when path is "-".
class OutputTarget {
 public:
  explicit OutputTarget(const std::string& path) {
    if (path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw mc::Error("cannot open output file '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

mc::ContrastMatrix load_contrasts(const std::string& spec) {
  if (spec == "default") return mc::default_pg_contrasts();
  std::ifstream in(spec);
  if (!in) throw mc::Error("cannot open contrast file '" + spec + "'");
  // One row per line: optional leading name, then comma-separated
  // coefficients, e.g. "dominant,-0.333,-0.333,0.667".
  mc::ContrastMatrix c;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    std::string name;
    std::stringstream ss(line);
    std::string token;
    bool first = true;
    while (std::getline(ss, token, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        row.push_back(v);
      } catch (const std::exception&) {
        if (!first) {
          throw mc::Error("contrast file line " + std::to_string(line_no) +
                          ": cannot parse coefficient '" + token + "'");
        }
        name = token;
      }
      first = false;
    }
    if (row.empty()) {
      throw mc::Error("contrast file line " + std::to_string(line_no) +
                      ": no coefficients");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw mc::Error("contrast file line " + std::to_string(line_no) +
                      ": row length differs from previous rows");
    }
    rows.push_back(row);
    c.row_names.push_back(name);
  }
  if (rows.empty()) throw mc::Error("contrast file '" + spec + "' is empty");
  c.coef.resize(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      c.coef(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  for (std::size_t i = 0; i < c.row_names.size(); ++i) {
    if (c.row_names[i].empty()) c.row_names[i] = "c" + std::to_string(i + 1);
  }
  mc::validate_contrasts(c);
  return c;
}

struct TestOptions {
  std::string input;
  std::string in_format = "long-csv";
  std::string method = "all";
  std::string contrasts = "default";
  double alpha = 0.05;
  std::string tail = "one";
  double eps = 1e-3;
  std::size_t max_points = std::size_t{1} << 24;
  std::size_t nresamp_min = 1000;
  std::size_t nresamp_max = 100000;
  std::uint64_t seed = 0;
  std::string log_transform = "on";
  std::string out = "-";
  std::string format = "tsv";
};

int cmd_test(const TestOptions& opt) {
  const mc::InputFormat in_format = opt.in_format == "wide-csv"
                                        ? mc::InputFormat::wide_csv
                                        : mc::InputFormat::long_csv;
  const std::vector<mc::SnpDataset> sets = mc::parse_input(opt.input, in_format);
  const mc::ContrastMatrix contrasts = load_contrasts(opt.contrasts);
  const mc::Tail tail = opt.tail == "two" ? mc::Tail::two : mc::Tail::one;

  std::vector<mc::Method> methods;
  if (opt.method == "all") {
    methods = {mc::Method::mcm, mc::Method::mmcm, mc::Method::pmmcm, mc::Method::kw};
  } else {
    methods = {mc::method_from_name(opt.method)};
  }

  mc::QmcConfig qmc;
  qmc.abs_error_tol = opt.eps;
  qmc.max_points = opt.max_points;
  qmc.seed = opt.seed;
  mc::PermutationConfig perm;
  perm.eps = opt.eps;
  perm.n_resamp_min = opt.nresamp_min;
  perm.n_resamp_max = opt.nresamp_max;

  struct SnpRows {
    std::vector<mc::ScreenRow> rows;
    std::exception_ptr failure;
  };
  std::vector<SnpRows> results(sets.size());
  std::atomic<std::size_t> cursor{0};

  auto run_snp = [&](std::size_t idx) {
    const mc::SnpDataset& snp = sets[idx];
    SnpRows& slot = results[idx];
    try {
      mc::GroupedDataset data = snp.data;
      if (opt.log_transform == "on") {
        data = mc::log_transform(data);
      } else {
        data.scale = mc::Scale::log;  // trust the caller: already transformed
      }
      std::array<int, 3> sizes{};
      for (int g = 0; g < 3; ++g) sizes[g] = static_cast<int>(data.groups[g].size());

      for (mc::Method method : methods) {
        mc::ScreenRow row;
        row.snp_id = snp.snp_id;
        row.method = method;
        row.sizes = sizes;
        row.degenerate = snp.degenerate;
        const bool runnable = method == mc::Method::kw
                                  ? std::count_if(sizes.begin(), sizes.end(),
                                                  [](int n) { return n > 0; }) >= 2
                                  : !snp.degenerate;
        if (!runnable) {
          row.statistic = std::numeric_limits<double>::quiet_NaN();
          row.p_value = std::numeric_limits<double>::quiet_NaN();
          row.p_error = std::numeric_limits<double>::quiet_NaN();
          slot.rows.push_back(std::move(row));
          continue;
        }
        mc::TestResult res;
        switch (method) {
          case mc::Method::mcm:
            res = mc::max_contrast_test(data, contrasts, qmc, tail);
            break;
          case mc::Method::mmcm:
            res = mc::modified_max_contrast_test(data, contrasts, qmc, tail);
            break;
          case mc::Method::pmmcm: {
            mc::PermutationConfig pc = perm;
            pc.seed = mc::Rng::mix(opt.seed, fnv1a(snp.snp_id));
            res = mc::permuted_modified_max_contrast_test(data, contrasts, pc, tail);
            break;
          }
          case mc::Method::kw:
            res = mc::kruskal_wallis_test(data);
            break;
        }
        row.statistic = res.statistic.max_value;
        row.p_value = res.p_value;
        row.p_error = res.p_error;
        row.selected = res.selected_name;
        row.budget_exhausted = res.budget_exhausted;
        slot.rows.push_back(std::move(row));
      }
    } catch (const std::exception&) {
      slot.failure = std::current_exception();
    }
  };

  const int threads =
      std::max(1, std::min<int>(mc::thread_budget(), static_cast<int>(sets.size())));
  if (threads <= 1 || sets.size() <= 1) {
    for (std::size_t i = 0; i < sets.size(); ++i) run_snp(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = cursor.fetch_add(1); i < sets.size();
             i = cursor.fetch_add(1)) {
          run_snp(i);
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }

  mc::ScreenReport report;
  bool any_budget = false;
  for (SnpRows& slot : results) {
    if (slot.failure) std::rethrow_exception(slot.failure);
    for (mc::ScreenRow& row : slot.rows) {
      any_budget = any_budget || row.budget_exhausted;
      report.rows.push_back(std::move(row));
    }
  }

  OutputTarget target(opt.out);
  mc::write_report(target.stream(),
                   report,
                   opt.format == "json" ? mc::OutputFormat::json : mc::OutputFormat::tsv);
  return any_budget ? kExitBudget : kExitOk;
}

struct PowerOptions {
  std::vector<double> maf = {0.25};
  std::vector<int> n = {100};
  std::vector<std::string> pattern = {"dominant"};
  std::vector<double> delta = {0.5};
  double alpha = 0.05;
  double sigma2 = 1.0;
  std::size_t rtp_draws = 1000000;
  std::uint64_t seed = 0;
  double eps = 1e-3;
  std::size_t max_points = std::size_t{1} << 24;
  std::string out = "-";
};

int cmd_power(const PowerOptions& opt) {
  std::vector<mc::PowerGridPoint> grid;
  for (double maf : opt.maf) {
    for (int n : opt.n) {
      for (const std::string& pattern : opt.pattern) {
        for (double delta : opt.delta) {
          mc::PowerGridPoint point;
          point.maf = maf;
          point.n_total = n;
          point.pattern = mc::pattern_from_name(pattern);
          point.delta = delta;
          grid.push_back(point);
        }
      }
    }
  }
  mc::QmcConfig qmc;
  qmc.abs_error_tol = opt.eps;
  qmc.max_points = opt.max_points;
  qmc.seed = opt.seed;

  const std::vector<mc::PowerTableRow> rows =
      mc::power_table(grid, opt.alpha, opt.sigma2, opt.rtp_draws, opt.seed, qmc);
  OutputTarget target(opt.out);
  mc::write_power_table(target.stream(), rows);
  return kExitOk;
}

struct SimulateOptions {
  std::string manifest;
  std::vector<std::string> tables;
  std::string label_filter;
  double maf = 0.25;
  int n = 100;
  std::string pattern;
  double delta = 0;
  std::vector<std::string> methods = {"mcm", "mmcm", "kw"};
  std::size_t reps = 20000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::string tail = "two";
  double eps = 1e-3;
  std::size_t max_points = std::size_t{1} << 24;
  double perm_eps = 1e-3;
  std::size_t nresamp_min = 1000;
  std::size_t nresamp_max = 100000;
  std::string out = "-";
  std::string figure_dir;
};

void emit_figure_data(const std::string& dir,
                      const std::vector<std::pair<std::string, mc::ScenarioMetrics>>& rows) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::ofstream alpha_csv(fs::path(dir) / "type1_error.csv", std::ios::binary);
  std::ofstream power_csv(fs::path(dir) / "power_rp.csv", std::ios::binary);
  std::ofstream ppv_csv(fs::path(dir) / "ppv_rtp.csv", std::ios::binary);
  std::ofstream fp_csv(fs::path(dir) / "false_positive.csv", std::ios::binary);
  alpha_csv << "n_total,maf,method,rate\n";
  power_csv << "n_total,maf,pattern,delta,method,r_p\n";
  ppv_csv << "n_total,maf,pattern,delta,method,r_tp\n";
  fp_csv << "n_total,maf,delta,method,r_p\n";

  auto num = [](double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  };
  for (const auto& [label, metrics] : rows) {
    const mc::ScenarioConfig& cfg = metrics.config;
    for (const auto& [method, mm] : metrics.per_method) {
      const std::string base = std::to_string(cfg.n_total) + "," + num(cfg.maf);
      const double rp = mm.r_p_hat(metrics.reps);
      switch (cfg.pattern) {
        case mc::Pattern::null_pattern:
          alpha_csv << base << ',' << mc::method_name(method) << ',' << rp << '\n';
          break;
        case mc::Pattern::valley:
          fp_csv << base << ',' << num(cfg.delta) << ',' << mc::method_name(method)
                 << ',' << rp << '\n';
          break;
        default:
          power_csv << base << ',' << mc::pattern_name(cfg.pattern) << ','
                    << num(cfg.delta) << ',' << mc::method_name(method) << ',' << rp
                    << '\n';
          if (method != mc::Method::kw) {
            ppv_csv << base << ',' << mc::pattern_name(cfg.pattern) << ','
                    << num(cfg.delta) << ',' << mc::method_name(method) << ','
                    << mm.r_tp_hat(metrics.reps) << '\n';
          }
          break;
      }
    }
  }
}

int cmd_simulate(const SimulateOptions& opt) {
  std::vector<mc::ManifestScenario> scenarios;
  if (!opt.manifest.empty()) {
    std::vector<mc::ManifestScenario> all = mc::load_manifest(opt.manifest);
    for (mc::ManifestScenario& entry : all) {
      if (entry.table == "T2") continue;  // bench rows belong to cmd_bench
      if (!opt.tables.empty() &&
          std::find(opt.tables.begin(), opt.tables.end(), entry.table) ==
              opt.tables.end()) {
        continue;
      }
      if (!opt.label_filter.empty() &&
          entry.label.find(opt.label_filter) == std::string::npos) {
        continue;
      }
      scenarios.push_back(std::move(entry));
    }
  } else {
    if (opt.pattern.empty()) {
      throw mc::Error("either --manifest or --pattern (with --maf/--n/--delta) is required");
    }
    mc::ManifestScenario entry;
    entry.table = "adhoc";
    entry.config.maf = opt.maf;
    entry.config.n_total = opt.n;
    entry.config.pattern = mc::pattern_from_name(opt.pattern);
    entry.config.delta = opt.delta;
    entry.config.methods.clear();
    for (const std::string& m : opt.methods) {
      entry.config.methods.push_back(mc::method_from_name(m));
    }
    entry.label = "adhoc " + opt.pattern + " delta=" + std::to_string(opt.delta);
    scenarios.push_back(std::move(entry));
  }

  std::vector<std::pair<std::string, mc::ScenarioMetrics>> rows;
  for (mc::ManifestScenario& entry : scenarios) {
    mc::ScenarioConfig cfg = entry.config;
    cfg.reps = opt.reps;
    cfg.alpha = opt.alpha;
    cfg.seed = opt.seed;
    cfg.tail = opt.tail == "one" ? mc::Tail::one : mc::Tail::two;
    cfg.qmc.abs_error_tol = opt.eps;
    cfg.qmc.max_points = opt.max_points;
    cfg.perm.eps = opt.perm_eps;
    cfg.perm.n_resamp_min = opt.nresamp_min;
    cfg.perm.n_resamp_max = opt.nresamp_max;
    cfg.threads = mc::thread_budget();
    if (opt.reps == 0) {
      continue;  // header-only output below
    }
    rows.emplace_back(entry.label, mc::run_scenario(cfg));
  }

  OutputTarget target(opt.out);
  mc::write_metrics_csv(target.stream(), rows);
  if (!opt.figure_dir.empty()) emit_figure_data(opt.figure_dir, rows);
  return kExitOk;
}

struct BenchOptions {
  std::string manifest;
  std::size_t reps = 100;
  double eps = 1e-2;
  std::uint64_t seed = 1;
  std::size_t nresamp_min = 1000;
  std::size_t nresamp_max = 100000;
  std::string out = "-";
};

int cmd_bench(const BenchOptions& opt) {
  std::vector<mc::ScenarioConfig> scenarios;
  if (!opt.manifest.empty()) {
    for (const mc::ManifestScenario& entry : mc::load_manifest(opt.manifest)) {
      if (entry.table == "T2") scenarios.push_back(entry.config);
    }
  } else {
    // The five timing scenarios: one per response pattern at n=300.
    struct Cell {
      mc::Pattern pattern;
      double delta;
      double maf;
    };
    const Cell cells[] = {{mc::Pattern::null_pattern, 0.0, 0.33},
                          {mc::Pattern::additive, 0.25, 0.12},
                          {mc::Pattern::dominant, 1.0, 0.50},
                          {mc::Pattern::recessive, 0.5, 0.25},
                          {mc::Pattern::valley, 0.25, 0.33}};
    for (const Cell& cell : cells) {
      mc::ScenarioConfig cfg;
      cfg.pattern = cell.pattern;
      cfg.delta = cell.delta;
      cfg.maf = cell.maf;
      cfg.n_total = 300;
      cfg.methods = {mc::Method::pmmcm, mc::Method::mmcm};
      scenarios.push_back(cfg);
    }
  }
  for (mc::ScenarioConfig& cfg : scenarios) {
    cfg.seed = opt.seed;
    cfg.qmc.abs_error_tol = opt.eps;
    cfg.perm.eps = opt.eps;
    cfg.perm.n_resamp_min = opt.nresamp_min;
    cfg.perm.n_resamp_max = opt.nresamp_max;
  }

  const std::vector<mc::BenchRow> rows = mc::bench_timing(scenarios, opt.reps);
  OutputTarget target(opt.out);
  mc::write_bench_csv(target.stream(), rows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maximum contrast tests for genotype-response screening"};
  app.require_subcommand(1);

  TestOptions test_opt;
  CLI::App* test = app.add_subcommand("test", "screen SNP datasets with the configured tests");
  test->add_option("input", test_opt.input, "input CSV file")->required();
  test->add_option("--in-format", test_opt.in_format, "input layout")
      ->check(CLI::IsMember({"long-csv", "wide-csv"}))
      ->capture_default_str();
  test->add_option("--method", test_opt.method, "test to run")
      ->check(CLI::IsMember({"mcm", "mmcm", "pmmcm", "kw", "all"}))
      ->capture_default_str();
  test->add_option("--contrasts", test_opt.contrasts,
                   "contrast file or 'default' for the three genotype patterns")
      ->capture_default_str();
  test->add_option("--alpha", test_opt.alpha, "significance level (reserved for filtering)")
      ->capture_default_str();
  test->add_option("--tail", test_opt.tail, "one- or two-sided testing")
      ->check(CLI::IsMember({"one", "two"}))
      ->capture_default_str();
  test->add_option("--eps", test_opt.eps, "absolute error tolerance")
      ->capture_default_str();
  test->add_option("--max-points", test_opt.max_points, "integration point budget")
      ->capture_default_str();
  test->add_option("--nresamp-min", test_opt.nresamp_min, "minimum resamples")
      ->capture_default_str();
  test->add_option("--nresamp-max", test_opt.nresamp_max, "maximum resamples")
      ->capture_default_str();
  test->add_option("--seed", test_opt.seed, "random seed")->capture_default_str();
  test->add_option("--log-transform", test_opt.log_transform,
                   "log-transform raw values ('off' when input is already log scale)")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  test->add_option("--out", test_opt.out, "output path or '-'")->capture_default_str();
  test->add_option("--format", test_opt.format, "report format")
      ->check(CLI::IsMember({"tsv", "json"}))
      ->capture_default_str();

  PowerOptions power_opt;
  CLI::App* power = app.add_subcommand(
      "power", "critical values, power, and detection probabilities over a grid");
  power->add_option("--maf", power_opt.maf, "minor allele frequencies")
      ->capture_default_str();
  power->add_option("--n", power_opt.n, "total sample sizes")->capture_default_str();
  power->add_option("--pattern", power_opt.pattern, "response patterns")
      ->capture_default_str();
  power->add_option("--delta", power_opt.delta, "effect sizes")->capture_default_str();
  power->add_option("--alpha", power_opt.alpha, "significance level")
      ->capture_default_str();
  power->add_option("--sigma2", power_opt.sigma2, "error variance")
      ->capture_default_str();
  power->add_option("--rtp-draws", power_opt.rtp_draws,
                    "Monte-Carlo draws for detection probabilities (0 = skip)")
      ->capture_default_str();
  power->add_option("--seed", power_opt.seed, "random seed")->capture_default_str();
  power->add_option("--eps", power_opt.eps, "absolute error tolerance")
      ->capture_default_str();
  power->add_option("--max-points", power_opt.max_points, "integration point budget")
      ->capture_default_str();
  power->add_option("--out", power_opt.out, "output path or '-'")->capture_default_str();

  SimulateOptions sim_opt;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "replicate operating characteristics for scenario cells");
  simulate->add_option("--manifest", sim_opt.manifest, "scenario manifest (TOML)");
  simulate->add_option("--table", sim_opt.tables, "restrict to manifest tables");
  simulate->add_option("--label", sim_opt.label_filter, "substring filter on labels");
  simulate->add_option("--maf", sim_opt.maf, "ad-hoc scenario MAF")->capture_default_str();
  simulate->add_option("--n", sim_opt.n, "ad-hoc scenario total n")->capture_default_str();
  simulate->add_option("--pattern", sim_opt.pattern, "ad-hoc scenario pattern");
  simulate->add_option("--delta", sim_opt.delta, "ad-hoc scenario effect size")
      ->capture_default_str();
  simulate->add_option("--methods", sim_opt.methods, "ad-hoc scenario methods")
      ->capture_default_str();
  simulate->add_option("--reps", sim_opt.reps, "replicates per scenario")
      ->capture_default_str();
  simulate->add_option("--alpha", sim_opt.alpha, "significance level")
      ->capture_default_str();
  simulate->add_option("--seed", sim_opt.seed, "random seed")->capture_default_str();
  simulate->add_option("--tail", sim_opt.tail, "tail convention")
      ->check(CLI::IsMember({"one", "two"}))
      ->capture_default_str();
  simulate->add_option("--eps", sim_opt.eps, "integrator tolerance")
      ->capture_default_str();
  simulate->add_option("--max-points", sim_opt.max_points, "integration point budget")
      ->capture_default_str();
  simulate->add_option("--perm-eps", sim_opt.perm_eps, "permutation tolerance")
      ->capture_default_str();
  simulate->add_option("--nresamp-min", sim_opt.nresamp_min, "minimum resamples")
      ->capture_default_str();
  simulate->add_option("--nresamp-max", sim_opt.nresamp_max, "maximum resamples")
      ->capture_default_str();
  simulate->add_option("--out", sim_opt.out, "output path or '-'")
      ->capture_default_str();
  simulate->add_option("--figure-data", sim_opt.figure_dir,
                       "directory for plot-ready per-figure CSVs");

  BenchOptions bench_opt;
  CLI::App* bench =
      app.add_subcommand("bench", "wall-clock timing of the resampling and QMC tests");
  bench->add_option("--manifest", bench_opt.manifest,
                    "scenario manifest (TOML); built-in timing cells when omitted");
  bench->add_option("--reps", bench_opt.reps, "tests per scenario")
      ->capture_default_str();
  bench->add_option("--eps", bench_opt.eps, "shared absolute error tolerance")
      ->capture_default_str();
  bench->add_option("--seed", bench_opt.seed, "random seed")->capture_default_str();
  bench->add_option("--nresamp-min", bench_opt.nresamp_min, "minimum resamples")
      ->capture_default_str();
  bench->add_option("--nresamp-max", bench_opt.nresamp_max, "maximum resamples")
      ->capture_default_str();
  bench->add_option("--out", bench_opt.out, "output path or '-'")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (test->parsed()) return cmd_test(test_opt);
    if (power->parsed()) return cmd_power(power_opt);
    if (simulate->parsed()) return cmd_simulate(sim_opt);
    if (bench->parsed()) return cmd_bench(bench_opt);
  } catch (const mc::BudgetExhausted& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}
