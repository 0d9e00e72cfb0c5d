#include "maxcontrast/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "json.hpp"

#include "maxcontrast/power.hpp"
#include "maxcontrast/rng.hpp"

namespace maxcontrast {

namespace {

using nlohmann::ordered_json;

std::string fmt_g(double x, int digits = 9) {
  if (std::isnan(x)) return "NA";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  return buf;
}

// Full-precision form for files meant to be parsed back bit-exactly.
std::string fmt_exact(double x) { return fmt_g(x, 17); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// getline with CRLF tolerance
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

double parse_value(const std::string& token, std::size_t line_no) {
  double out = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(out)) {
    throw MalformedRow(line_no, "cannot parse value '" + token + "'");
  }
  return out;
}

int parse_genotype(const std::string& token, std::size_t line_no) {
  if (token == "0") return 0;
  if (token == "1") return 1;
  if (token == "2") return 2;
  throw UnknownGenotype(line_no, token);
}

std::vector<SnpDataset> group_records(const std::vector<SnpRecord>& records) {
  std::vector<SnpDataset> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const SnpRecord& rec : records) {
    auto [it, inserted] = index.emplace(rec.snp_id, out.size());
    if (inserted) {
      SnpDataset set;
      set.snp_id = rec.snp_id;
      set.data.groups.resize(3);
      out.push_back(std::move(set));
    }
    out[it->second].data.groups[static_cast<std::size_t>(rec.genotype)].push_back(
        rec.value);
  }
  for (SnpDataset& set : out) {
    set.degenerate = false;
    for (const auto& g : set.data.groups) {
      if (g.empty()) set.degenerate = true;
    }
  }
  return out;
}

std::vector<SnpDataset> parse_long(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_line(in, line)) throw MalformedRow(1, "empty input");
  ++line_no;
  if (line != "snp_id,subject_id,genotype,value") {
    throw MalformedRow(1, "expected header 'snp_id,subject_id,genotype,value'");
  }

  std::vector<SnpRecord> records;
  std::unordered_set<std::string> seen;  // "snp\x1fsubject"
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 4) {
      throw MalformedRow(line_no,
                         "expected 4 fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty()) {
      throw MalformedRow(line_no, "empty snp_id or subject_id");
    }
    SnpRecord rec;
    rec.snp_id = f[0];
    rec.subject_id = f[1];
    rec.genotype = parse_genotype(f[2], line_no);
    rec.value = parse_value(f[3], line_no);
    if (!seen.insert(rec.snp_id + '\x1f' + rec.subject_id).second) {
      throw DuplicateObservation(rec.snp_id, rec.subject_id);
    }
    records.push_back(std::move(rec));
  }
  return group_records(records);
}

std::vector<SnpDataset> parse_wide(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_line(in, line)) throw MalformedRow(1, "empty input");
  ++line_no;
  const std::vector<std::string> head = split(line, ',');
  if (head.size() < 3 || head[0] != "subject_id" || head[1] != "value") {
    throw MalformedRow(1, "expected header 'subject_id,value,geno_<snp>,...'");
  }
  std::vector<std::string> snps;
  for (std::size_t i = 2; i < head.size(); ++i) {
    if (head[i].rfind("geno_", 0) != 0 || head[i].size() == 5) {
      throw MalformedRow(1, "genotype column '" + head[i] +
                                "' must be named geno_<snp>");
    }
    snps.push_back(head[i].substr(5));
  }
  {
    std::unordered_set<std::string> uniq(snps.begin(), snps.end());
    if (uniq.size() != snps.size()) throw MalformedRow(1, "duplicate snp column");
  }

  std::vector<SnpRecord> records;
  std::unordered_set<std::string> subjects;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != head.size()) {
      throw MalformedRow(line_no, "expected " + std::to_string(head.size()) +
                                      " fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty()) throw MalformedRow(line_no, "empty subject_id");
    if (!subjects.insert(f[0]).second) {
      throw DuplicateObservation(snps.front(), f[0]);
    }
    const double value = parse_value(f[1], line_no);
    for (std::size_t i = 0; i < snps.size(); ++i) {
      SnpRecord rec;
      rec.snp_id = snps[i];
      rec.subject_id = f[0];
      rec.genotype = parse_genotype(f[2 + i], line_no);
      rec.value = value;
      records.push_back(std::move(rec));
    }
  }
  // Column order, not row order, drives dataset order in the wide layout.
  std::vector<SnpRecord> ordered;
  ordered.reserve(records.size());
  for (const std::string& snp : snps) {
    for (const SnpRecord& rec : records) {
      if (rec.snp_id == snp) ordered.push_back(rec);
    }
  }
  return group_records(ordered);
}

}  // namespace

std::vector<SnpDataset> parse_input_stream(std::istream& in, InputFormat format) {
  return format == InputFormat::long_csv ? parse_long(in) : parse_wide(in);
}

std::vector<SnpDataset> parse_input(const std::string& path, InputFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open input file '" + path + "'");
  return parse_input_stream(in, format);
}

void write_long_csv(std::ostream& out, const std::vector<SnpDataset>& sets) {
  out << "snp_id,subject_id,genotype,value\n";
  for (const SnpDataset& set : sets) {
    std::size_t counter = 0;
    for (int g = 0; g < 3; ++g) {
      for (double v : set.data.groups[g]) {
        out << set.snp_id << ",s" << ++counter << ',' << g << ',' << fmt_exact(v)
            << '\n';
      }
    }
  }
}

void write_wide_csv(std::ostream& out, const std::vector<SnpDataset>& sets) {
  if (sets.empty()) throw Error("wide output requires at least one dataset");
  const std::size_t n = sets.front().data.total_size();
  for (const SnpDataset& set : sets) {
    if (set.data.total_size() != n) {
      throw DimensionMismatch("wide output requires equal subject counts; snp '" +
                              set.snp_id + "' differs");
    }
  }

  // Subjects are canonicalized from the first dataset (group-major order);
  // every other dataset must assign the same multiset of values, genotype by
  // genotype, or the collection never came from one wide table.
  std::vector<double> values;
  values.reserve(n);
  std::vector<std::vector<int>> geno(sets.size(), std::vector<int>(n, 0));
  {
    std::size_t j = 0;
    for (int g = 0; g < 3; ++g) {
      for (double v : sets.front().data.groups[g]) {
        values.push_back(v);
        geno[0][j++] = g;
      }
    }
  }
  for (std::size_t s = 1; s < sets.size(); ++s) {
    std::map<double, std::array<int, 3>> avail;
    for (int g = 0; g < 3; ++g) {
      for (double v : sets[s].data.groups[g]) ++avail[v][static_cast<std::size_t>(g)];
    }
    for (std::size_t j = 0; j < n; ++j) {
      auto it = avail.find(values[j]);
      int pick = -1;
      if (it != avail.end()) {
        for (int g = 0; g < 3; ++g) {
          if (it->second[g] > 0) {
            pick = g;
            break;
          }
        }
      }
      if (pick < 0) {
        throw DimensionMismatch("datasets are not subject-aligned; snp '" +
                                sets[s].snp_id + "' lacks value " +
                                fmt_exact(values[j]));
      }
      --it->second[static_cast<std::size_t>(pick)];
      geno[s][j] = pick;
    }
  }

  out << "subject_id,value";
  for (const SnpDataset& set : sets) out << ",geno_" << set.snp_id;
  out << '\n';
  for (std::size_t j = 0; j < n; ++j) {
    out << 's' << j + 1 << ',' << fmt_exact(values[j]);
    for (std::size_t s = 0; s < sets.size(); ++s) out << ',' << geno[s][j];
    out << '\n';
  }
}

// ---------- screening report ----------

namespace {

constexpr const char* kReportColumns[] = {"snp_id", "method",  "statistic",
                                          "p_value", "p_error", "selected",
                                          "n0",      "n1",      "n2",
                                          "flags"};

std::vector<std::string> row_flags(const ScreenRow& row) {
  std::vector<std::string> flags;
  if (row.degenerate) flags.emplace_back("degenerate");
  if (row.budget_exhausted) flags.emplace_back("budget_exhausted");
  return flags;
}

std::vector<ScreenRow> sorted_rows(const ScreenReport& report) {
  std::vector<ScreenRow> rows = report.rows;
  std::stable_sort(rows.begin(), rows.end(), [](const ScreenRow& a, const ScreenRow& b) {
    if (a.method != b.method) return a.method < b.method;
    const double pa = std::isnan(a.p_value) ? 2.0 : a.p_value;
    const double pb = std::isnan(b.p_value) ? 2.0 : b.p_value;
    return pa < pb;
  });
  return rows;
}

}  // namespace

void write_report(std::ostream& out, const ScreenReport& report, OutputFormat format) {
  const std::vector<ScreenRow> rows = sorted_rows(report);
  if (format == OutputFormat::tsv) {
    bool first = true;
    for (const char* col : kReportColumns) {
      out << (first ? "" : "\t") << col;
      first = false;
    }
    out << '\n';
    for (const ScreenRow& row : rows) {
      const std::vector<std::string> flags = row_flags(row);
      std::string joined;
      for (const std::string& f : flags) {
        if (!joined.empty()) joined += ',';
        joined += f;
      }
      out << row.snp_id << '\t' << method_name(row.method) << '\t'
          << fmt_g(row.statistic) << '\t' << fmt_g(row.p_value) << '\t'
          << fmt_g(row.p_error) << '\t' << (row.selected.empty() ? "-" : row.selected)
          << '\t' << row.sizes[0] << '\t' << row.sizes[1] << '\t' << row.sizes[2]
          << '\t' << (joined.empty() ? "-" : joined) << '\n';
    }
    return;
  }

  ordered_json doc = ordered_json::array();
  for (const ScreenRow& row : rows) {
    ordered_json obj;
    obj[kReportColumns[0]] = row.snp_id;
    obj[kReportColumns[1]] = method_name(row.method);
    obj[kReportColumns[2]] = row.statistic;
    obj[kReportColumns[3]] = row.p_value;
    obj[kReportColumns[4]] = row.p_error;
    obj[kReportColumns[5]] = row.selected.empty() ? "-" : row.selected;
    obj[kReportColumns[6]] = row.sizes[0];
    obj[kReportColumns[7]] = row.sizes[1];
    obj[kReportColumns[8]] = row.sizes[2];
    obj[kReportColumns[9]] = row_flags(row);
    doc.push_back(std::move(obj));
  }
  out << doc.dump(2) << '\n';
}

// ---------- power tables ----------

namespace {

int true_row_of(Pattern p) {
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

}  // namespace

std::vector<PowerTableRow> power_table(const std::vector<PowerGridPoint>& grid,
                                       double alpha, double sigma2,
                                       std::size_t rtp_draws, std::uint64_t seed,
                                       const QmcConfig& cfg) {
  std::vector<PowerTableRow> rows;
  rows.reserve(grid.size());
  const ContrastMatrix contrasts = default_pg_contrasts();
  std::uint64_t row_index = 0;
  for (const PowerGridPoint& point : grid) {
    PowerTableRow row;
    row.point = point;
    row.sizes = hwe_group_sizes(point.maf, point.n_total);
    Eigen::VectorXd inv_sizes(3);
    for (int i = 0; i < 3; ++i) {
      if (row.sizes[i] == 0) throw EmptyGroup(i + 1);
      inv_sizes(i) = 1.0 / row.sizes[i];
    }
    const double gamma = point.n_total - 3;

    row.critical = critical_values(alpha, contrasts, inv_sizes, gamma, cfg);
    const Eigen::VectorXd mu = pattern_means(point.pattern, point.delta);
    row.lambda_t = noncentrality(StatKind::t_like, mu, sigma2, contrasts, inv_sizes);
    const CovarianceModel model_t = sigma_T(contrasts, inv_sizes);
    const PowerResult bt = power_at_thresholds(model_t, gamma, row.lambda_t,
                                               row.critical.thresholds_T,
                                               StatKind::t_like, cfg);
    const PowerResult bs = power_at_thresholds(model_t, gamma, row.lambda_t,
                                               row.critical.thresholds_S,
                                               StatKind::s_like, cfg);
    row.beta_t = bt.beta;
    row.beta_t_err = bt.est_error;
    row.beta_s = bs.beta;
    row.beta_s_err = bs.est_error;
    row.priority = priority_index(contrasts, inv_sizes);

    const int k_true = true_row_of(point.pattern);
    if (k_true > 0 && rtp_draws > 0 && point.delta > 0) {
      const RtpEstimate rt =
          r_tp_at(StatKind::t_like, model_t, gamma, row.lambda_t,
                  row.critical.u_alpha, k_true, rtp_draws, Rng::mix(seed, 2 * row_index));
      const CovarianceModel model_s = sigma_S(contrasts, inv_sizes);
      const Eigen::VectorXd lambda_s =
          noncentrality(StatKind::s_like, mu, sigma2, contrasts, inv_sizes);
      const RtpEstimate rs =
          r_tp_at(StatKind::s_like, model_s, gamma, lambda_s, row.critical.v_alpha,
                  k_true, rtp_draws, Rng::mix(seed, 2 * row_index + 1));
      row.rtp_t = rt.value;
      row.rtp_t_se = rt.std_error;
      row.rtp_s = rs.value;
      row.rtp_s_se = rs.std_error;
      row.rtp_draws = rtp_draws;
    }
    rows.push_back(std::move(row));
    ++row_index;
  }
  return rows;
}

void write_power_table(std::ostream& out, const std::vector<PowerTableRow>& rows) {
  out << "maf,n_total,n0,n1,n2,pattern,delta,u_alpha,v_alpha,"
         "kinv_1,kinv_2,kinv_3,thr_s_1,thr_s_2,thr_s_3,"
         "lambda_t_1,lambda_t_2,lambda_t_3,beta_t,beta_t_err,beta_s,beta_s_err,"
         "priority_index,rtp_t,rtp_t_se,rtp_s,rtp_s_se,rtp_draws\n";
  for (const PowerTableRow& row : rows) {
    out << fmt_g(row.point.maf) << ',' << row.point.n_total << ',' << row.sizes[0]
        << ',' << row.sizes[1] << ',' << row.sizes[2] << ','
        << pattern_name(row.point.pattern) << ',' << fmt_g(row.point.delta) << ','
        << fmt_g(row.critical.u_alpha) << ',' << fmt_g(row.critical.v_alpha);
    for (int k = 0; k < 3; ++k) out << ',' << fmt_g(row.critical.k_inv(k));
    for (int k = 0; k < 3; ++k) out << ',' << fmt_g(row.critical.thresholds_S(k));
    for (int k = 0; k < 3; ++k) out << ',' << fmt_g(row.lambda_t(k));
    out << ',' << fmt_g(row.beta_t) << ',' << fmt_g(row.beta_t_err) << ','
        << fmt_g(row.beta_s) << ',' << fmt_g(row.beta_s_err) << ',' << row.priority;
    if (row.rtp_draws > 0) {
      out << ',' << fmt_g(row.rtp_t) << ',' << fmt_g(row.rtp_t_se) << ','
          << fmt_g(row.rtp_s) << ',' << fmt_g(row.rtp_s_se) << ',' << row.rtp_draws;
    } else {
      out << ",,,,,0";
    }
    out << '\n';
  }
}

// ---------- manifest ----------

namespace {

double toml_number(const TomlTable& table, const std::string& key,
                   const std::string& context) {
  const auto it = table.find(key);
  if (it == table.end()) throw Error(context + ": missing key '" + key + "'");
  if (const double* num = std::get_if<double>(&it->second)) return *num;
  throw Error(context + ": key '" + key + "' is not a number");
}

std::string toml_string(const TomlTable& table, const std::string& key,
                        const std::string& context) {
  const auto it = table.find(key);
  if (it == table.end()) throw Error(context + ": missing key '" + key + "'");
  if (const std::string* s = std::get_if<std::string>(&it->second)) return *s;
  throw Error(context + ": key '" + key + "' is not a string");
}

TomlValue parse_toml_value(const std::string& raw, std::size_t line_no) {
  const std::string token = trim(raw);
  if (token.empty()) throw MalformedRow(line_no, "empty value");
  if (token.front() == '"') {
    if (token.size() < 2 || token.back() != '"') {
      throw MalformedRow(line_no, "unterminated string");
    }
    return token.substr(1, token.size() - 2);
  }
  if (token == "true") return true;
  if (token == "false") return false;
  if (token.front() == '[') {
    if (token.back() != ']') throw MalformedRow(line_no, "unterminated array");
    const std::string inner = trim(token.substr(1, token.size() - 2));
    if (inner.empty()) return std::vector<double>{};
    std::vector<std::string> parts = split(inner, ',');
    const std::string first = trim(parts.front());
    if (first.empty()) throw MalformedRow(line_no, "empty array element");
    if (first.front() == '"') {
      std::vector<std::string> out;
      for (const std::string& part : parts) {
        TomlValue v = parse_toml_value(part, line_no);
        if (std::string* s = std::get_if<std::string>(&v)) {
          out.push_back(std::move(*s));
        } else {
          throw MalformedRow(line_no, "mixed array element types");
        }
      }
      return out;
    }
    std::vector<double> out;
    for (const std::string& part : parts) {
      TomlValue v = parse_toml_value(part, line_no);
      if (const double* num = std::get_if<double>(&v)) {
        out.push_back(*num);
      } else {
        throw MalformedRow(line_no, "mixed array element types");
      }
    }
    return out;
  }
  double num = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto res = std::from_chars(begin, end, num);
  if (res.ec != std::errc() || res.ptr != end) {
    throw MalformedRow(line_no, "cannot parse value '" + token + "'");
  }
  return num;
}

}  // namespace

std::vector<std::pair<std::string, TomlTable>> parse_toml_subset(std::istream& in) {
  std::vector<std::pair<std::string, TomlTable>> out;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    // strip comments; the subset allows '#' only outside strings
    const std::size_t quote = line.find('"');
    std::size_t hash = line.find('#');
    if (hash != std::string::npos && quote != std::string::npos && quote < hash) {
      hash = line.find('#', line.find('"', quote + 1) + 1);
    }
    if (hash != std::string::npos) line.resize(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;

    if (content.front() == '[') {
      std::string name = content;
      bool array_header = name.rfind("[[", 0) == 0;
      const std::string close = array_header ? "]]" : "]";
      if (name.size() < 2 * close.size() ||
          name.substr(name.size() - close.size()) != close) {
        throw MalformedRow(line_no, "malformed section header");
      }
      name = trim(name.substr(array_header ? 2 : 1,
                              name.size() - 2 * (array_header ? 2 : 1)));
      if (name.empty()) throw MalformedRow(line_no, "empty section name");
      out.emplace_back(name, TomlTable{});
      continue;
    }

    const std::size_t eq = content.find('=');
    if (eq == std::string::npos) throw MalformedRow(line_no, "expected key = value");
    const std::string key = trim(content.substr(0, eq));
    if (key.empty()) throw MalformedRow(line_no, "empty key");
    if (out.empty()) throw MalformedRow(line_no, "key outside any section");
    out.back().second[key] = parse_toml_value(content.substr(eq + 1), line_no);
  }
  return out;
}

std::vector<ManifestScenario> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path + "'");
  const auto sections = parse_toml_subset(in);

  std::vector<ManifestScenario> out;
  std::size_t index = 0;
  for (const auto& [name, table] : sections) {
    ++index;
    const std::string context = "manifest entry " + std::to_string(index);
    if (name != "scenario" && name != "bench") {
      throw Error(context + ": unknown section '" + name + "'");
    }
    ManifestScenario entry;
    entry.table = name == "bench" ? "T2" : toml_string(table, "table", context);
    if (table.count("table")) entry.table = toml_string(table, "table", context);

    ScenarioConfig& cfg = entry.config;
    cfg.maf = toml_number(table, "maf", context);
    cfg.n_total = static_cast<int>(toml_number(table, "n", context));
    cfg.pattern = pattern_from_name(toml_string(table, "pattern", context));
    cfg.delta = toml_number(table, "delta", context);
    if (table.count("methods")) {
      const auto it = table.find("methods");
      const auto* names = std::get_if<std::vector<std::string>>(&it->second);
      if (names == nullptr) throw Error(context + ": 'methods' must be a string array");
      cfg.methods.clear();
      for (const std::string& n : *names) cfg.methods.push_back(method_from_name(n));
    } else if (name == "bench") {
      cfg.methods = {Method::pmmcm, Method::mmcm};
    }
    if (table.count("reps")) {
      cfg.reps = static_cast<std::size_t>(toml_number(table, "reps", context));
    }
    if (table.count("alpha")) cfg.alpha = toml_number(table, "alpha", context);
    if (table.count("seed")) {
      cfg.seed = static_cast<std::uint64_t>(toml_number(table, "seed", context));
    }
    if (table.count("tail")) {
      const std::string tail = toml_string(table, "tail", context);
      if (tail == "one") {
        cfg.tail = Tail::one;
      } else if (tail == "two") {
        cfg.tail = Tail::two;
      } else {
        throw Error(context + ": tail must be 'one' or 'two'");
      }
    }
    entry.label = table.count("label")
                      ? toml_string(table, "label", context)
                      : entry.table + " " + pattern_name(cfg.pattern) +
                            " delta=" + fmt_g(cfg.delta) + " maf=" + fmt_g(cfg.maf) +
                            " n=" + std::to_string(cfg.n_total);
    out.push_back(std::move(entry));
  }
  return out;
}

// ---------- metrics / bench emission ----------

void write_metrics_csv(std::ostream& out,
                       const std::vector<std::pair<std::string, ScenarioMetrics>>& rows) {
  out << "label,maf,n_total,n0,n1,n2,pattern,delta,tail,alpha,seed,reps,"
         "method,n_p,n_tp,r_p_hat,r_tp_hat,selected_counts,seconds\n";
  for (const auto& [label, metrics] : rows) {
    const ScenarioConfig& cfg = metrics.config;
    for (const auto& [method, mm] : metrics.per_method) {
      out << label << ',' << fmt_g(cfg.maf) << ',' << cfg.n_total << ','
          << metrics.sizes[0] << ',' << metrics.sizes[1] << ',' << metrics.sizes[2]
          << ',' << pattern_name(cfg.pattern) << ',' << fmt_g(cfg.delta) << ','
          << (cfg.tail == Tail::two ? "two" : "one") << ',' << fmt_g(cfg.alpha)
          << ',' << cfg.seed << ',' << metrics.reps << ',' << method_name(method)
          << ',' << mm.n_p << ',' << mm.n_tp << ',' << fmt_g(mm.r_p_hat(metrics.reps));
      if (method == Method::kw) {
        out << ',';
      } else {
        out << ',' << fmt_g(mm.r_tp_hat(metrics.reps));
      }
      out << ',';
      for (std::size_t i = 0; i < mm.selected.size(); ++i) {
        out << (i ? ";" : "") << mm.selected[i];
      }
      out << ',' << fmt_g(mm.seconds) << '\n';
    }
  }
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "# wall-clock seconds on the local machine; absolute values are "
         "hardware-specific and not comparable across systems\n";
  out << "scenario,method,reps,total_seconds,seconds_per_test,mean_resamples\n";
  for (const BenchRow& row : rows) {
    const double per = row.reps ? row.total_seconds / static_cast<double>(row.reps) : 0;
    out << row.scenario << ',' << method_name(row.method) << ',' << row.reps << ','
        << fmt_g(row.total_seconds) << ',' << fmt_g(per) << ','
        << fmt_g(row.mean_resamples) << '\n';
  }
}

int thread_budget() {
  if (const char* env = std::getenv("MAXCON_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace maxcontrast
