#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "maxcontrast/core.hpp"
#include "maxcontrast/power.hpp"
#include "maxcontrast/simulate.hpp"
#include "maxcontrast/tests.hpp"

namespace maxcontrast {

struct MalformedRow : Error {
  std::size_t line;
  MalformedRow(std::size_t l, const std::string& why)
      : Error("line " + std::to_string(l) + ": " + why), line(l) {}
};

struct UnknownGenotype : Error {
  std::size_t line;
  UnknownGenotype(std::size_t l, const std::string& token)
      : Error("line " + std::to_string(l) + ": unknown genotype '" + token + "'"),
        line(l) {}
};

struct DuplicateObservation : Error {
  DuplicateObservation(const std::string& snp, const std::string& subject)
      : Error("duplicate observation for snp '" + snp + "', subject '" + subject + "'") {}
};

struct SnpRecord {
  std::string snp_id;
  std::string subject_id;
  int genotype = 0;  // 0 = AA, 1 = Aa, 2 = aa
  double value = 0;
};

enum class InputFormat { long_csv, wide_csv };

// One SNP's dataset plus bookkeeping collected during parsing.
struct SnpDataset {
  std::string snp_id;
  GroupedDataset data;    // three groups in genotype order 0,1,2
  bool degenerate = false;  // some genotype group empty
};

// Datasets come back in first-appearance order.
std::vector<SnpDataset> parse_input(const std::string& path, InputFormat format);
std::vector<SnpDataset> parse_input_stream(std::istream& in, InputFormat format);

void write_long_csv(std::ostream& out, const std::vector<SnpDataset>& sets);
void write_wide_csv(std::ostream& out, const std::vector<SnpDataset>& sets);

struct ScreenRow {
  std::string snp_id;
  Method method = Method::mcm;
  double statistic = 0;
  double p_value = 1;
  double p_error = 0;
  std::string selected;
  std::array<int, 3> sizes{};
  bool degenerate = false;
  bool budget_exhausted = false;
};

struct ScreenReport {
  std::vector<ScreenRow> rows;  // sorted by p ascending within method
};

enum class OutputFormat { tsv, json };

void write_report(std::ostream& out, const ScreenReport& report, OutputFormat format);

// ---------- power tables ----------

struct PowerGridPoint {
  double maf = 0.25;
  int n_total = 100;
  Pattern pattern = Pattern::dominant;
  double delta = 0.5;
};

struct PowerTableRow {
  PowerGridPoint point;
  std::array<int, 3> sizes{};
  CriticalValues critical;
  Eigen::VectorXd lambda_t;
  double beta_t = 0, beta_t_err = 0;
  double beta_s = 0, beta_s_err = 0;
  int priority = 0;
  double rtp_t = 0, rtp_t_se = 0;
  double rtp_s = 0, rtp_s_se = 0;
  std::size_t rtp_draws = 0;
};

std::vector<PowerTableRow> power_table(const std::vector<PowerGridPoint>& grid,
                                       double alpha, double sigma2,
                                       std::size_t rtp_draws, std::uint64_t seed,
                                       const QmcConfig& cfg);

void write_power_table(std::ostream& out, const std::vector<PowerTableRow>& rows);

// ---------- scenario manifest (paper-tables.toml) ----------

struct ManifestScenario {
  std::string table;  // S1 ... S5, T2
  std::string label;
  ScenarioConfig config;
};

// Minimal TOML subset: comments, [[section]] array-of-table headers, and
// key = string | number | boolean | flat array lines.
using TomlValue = std::variant<std::string, double, bool, std::vector<double>,
                               std::vector<std::string>>;
using TomlTable = std::map<std::string, TomlValue>;

std::vector<std::pair<std::string, TomlTable>> parse_toml_subset(std::istream& in);

std::vector<ManifestScenario> load_manifest(const std::string& path);

void write_metrics_csv(std::ostream& out,
                       const std::vector<std::pair<std::string, ScenarioMetrics>>& rows);
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

// worker-pool size: MAXCON_THREADS, 0 or unset = hardware concurrency
int thread_budget();

}  // namespace maxcontrast
