#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include <maxcontrast/io.hpp>

using namespace maxcontrast;

namespace {

const char* kLongSample =
    "snp_id,subject_id,genotype,value\n"
    "rs1,s1,0,1.5\n"
    "rs1,s2,0,2.5\n"
    "rs1,s3,1,3.5\n"
    "rs1,s4,2,4.5\n"
    "rs2,s1,1,0.5\n"
    "rs2,s2,2,0.25\n"
    "rs2,s3,0,0.75\n"
    "rs2,s4,0,0.125\n";

std::vector<SnpDataset> parse_string(const std::string& text, InputFormat format) {
  std::istringstream in(text);
  return parse_input_stream(in, format);
}

}  // namespace

TEST_CASE("long csv parses into genotype groups in first-appearance order") {
  std::vector<SnpDataset> sets = parse_string(kLongSample, InputFormat::long_csv);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].snp_id == "rs1");
  CHECK(sets[1].snp_id == "rs2");
  REQUIRE(sets[0].data.groups.size() == 3);
  CHECK(sets[0].data.groups[0] == std::vector<double>{1.5, 2.5});
  CHECK(sets[0].data.groups[1] == std::vector<double>{3.5});
  CHECK(sets[0].data.groups[2] == std::vector<double>{4.5});
  CHECK(!sets[0].degenerate);
  CHECK(sets[1].data.groups[0] == std::vector<double>{0.75, 0.125});
}

TEST_CASE("a missing genotype group marks the snp degenerate") {
  std::vector<SnpDataset> sets = parse_string(
      "snp_id,subject_id,genotype,value\n"
      "rs9,s1,0,1.0\n"
      "rs9,s2,0,2.0\n"
      "rs9,s3,1,3.0\n",
      InputFormat::long_csv);
  REQUIRE(sets.size() == 1);
  CHECK(sets[0].degenerate);
  CHECK(sets[0].data.groups[2].empty());
}

TEST_CASE("long csv rejects malformed input with line numbers") {
  CHECK_THROWS_AS(parse_string("wrong,header\n", InputFormat::long_csv), MalformedRow);
  CHECK_THROWS_AS(parse_string("snp_id,subject_id,genotype,value\nrs1,s1,0\n",
                               InputFormat::long_csv),
                  MalformedRow);
  CHECK_THROWS_AS(parse_string("snp_id,subject_id,genotype,value\nrs1,s1,0,abc\n",
                               InputFormat::long_csv),
                  MalformedRow);
  CHECK_THROWS_AS(parse_string("snp_id,subject_id,genotype,value\nrs1,s1,3,1.0\n",
                               InputFormat::long_csv),
                  UnknownGenotype);
  try {
    parse_string(
        "snp_id,subject_id,genotype,value\n"
        "rs1,s1,0,1.0\n"
        "rs1,s1,1,2.0\n",
        InputFormat::long_csv);
    FAIL("expected DuplicateObservation");
  } catch (const DuplicateObservation& e) {
    CHECK(std::string(e.what()).find("rs1") != std::string::npos);
  }
}

TEST_CASE("wide csv parses one column per snp") {
  std::vector<SnpDataset> sets = parse_string(
      "subject_id,value,geno_rs1,geno_rs2\n"
      "s1,1.5,0,1\n"
      "s2,2.5,1,0\n"
      "s3,3.5,2,0\n",
      InputFormat::wide_csv);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].snp_id == "rs1");
  CHECK(sets[0].data.groups[0] == std::vector<double>{1.5});
  CHECK(sets[0].data.groups[1] == std::vector<double>{2.5});
  CHECK(sets[0].data.groups[2] == std::vector<double>{3.5});
  CHECK(sets[1].data.groups[0] == std::vector<double>{2.5, 3.5});
  CHECK(sets[1].data.groups[1] == std::vector<double>{1.5});
  CHECK(sets[1].degenerate);

  CHECK_THROWS_AS(parse_string("subject_id,value\ns1,1.0\n", InputFormat::wide_csv),
                  MalformedRow);
  CHECK_THROWS_AS(parse_string(
                      "subject_id,value,geno_rs1\n"
                      "s1,1.0,0\n"
                      "s1,2.0,1\n",
                      InputFormat::wide_csv),
                  DuplicateObservation);
}

TEST_CASE("long csv round-trips exactly") {
  std::vector<SnpDataset> sets = parse_string(kLongSample, InputFormat::long_csv);
  std::ostringstream out;
  write_long_csv(out, sets);
  std::vector<SnpDataset> again = parse_string(out.str(), InputFormat::long_csv);
  REQUIRE(again.size() == sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    CHECK(again[i].snp_id == sets[i].snp_id);
    CHECK(again[i].data.groups == sets[i].data.groups);
  }
}

TEST_CASE("wide csv round-trips subject-aligned data") {
  // one phenotype value per subject, shared across snps
  std::vector<SnpDataset> sets = parse_string(
      "snp_id,subject_id,genotype,value\n"
      "rs1,s1,0,1.5\n"
      "rs1,s2,0,2.5\n"
      "rs1,s3,1,3.5\n"
      "rs1,s4,2,4.5\n"
      "rs2,s1,1,1.5\n"
      "rs2,s2,2,2.5\n"
      "rs2,s3,0,3.5\n"
      "rs2,s4,0,4.5\n",
      InputFormat::long_csv);
  std::ostringstream out;
  write_wide_csv(out, sets);
  std::vector<SnpDataset> again = parse_string(out.str(), InputFormat::wide_csv);
  REQUIRE(again.size() == sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    CHECK(again[i].snp_id == sets[i].snp_id);
    CHECK(again[i].data.groups == sets[i].data.groups);
  }
}

TEST_CASE("wide csv refuses values that differ per snp for one subject") {
  std::vector<SnpDataset> sets = parse_string(kLongSample, InputFormat::long_csv);
  std::ostringstream out;
  CHECK_THROWS_AS(write_wide_csv(out, sets), DimensionMismatch);
}

TEST_CASE("report rows sort by p within method and flag oddities") {
  ScreenReport report;
  ScreenRow a;
  a.snp_id = "rs_a";
  a.method = Method::mcm;
  a.statistic = 2.0;
  a.p_value = 0.04;
  a.sizes = {10, 5, 5};
  ScreenRow b = a;
  b.snp_id = "rs_b";
  b.p_value = 0.002;
  ScreenRow c = a;
  c.snp_id = "rs_c";
  c.method = Method::kw;
  c.p_value = 0.5;
  ScreenRow d = a;
  d.snp_id = "rs_d";
  d.statistic = std::numeric_limits<double>::quiet_NaN();
  d.p_value = std::numeric_limits<double>::quiet_NaN();
  d.degenerate = true;
  report.rows = {a, d, c, b};

  std::ostringstream out;
  write_report(out, report, OutputFormat::tsv);
  std::istringstream lines(out.str());
  std::string header, l1, l2, l3, l4;
  std::getline(lines, header);
  CHECK(header ==
        "snp_id\tmethod\tstatistic\tp_value\tp_error\tselected\tn0\tn1\tn2\tflags");
  std::getline(lines, l1);
  std::getline(lines, l2);
  std::getline(lines, l3);
  std::getline(lines, l4);
  CHECK(l1.substr(0, 4) == "rs_b");  // smallest p first within mcm
  CHECK(l2.substr(0, 4) == "rs_a");
  CHECK(l3.substr(0, 4) == "rs_d");  // NaN p sorts last within mcm
  CHECK(l4.substr(0, 4) == "rs_c");  // kw afterwards
  CHECK(l3.find("NA") != std::string::npos);
  CHECK(l3.find("degenerate") != std::string::npos);

  std::ostringstream js;
  write_report(js, report, OutputFormat::json);
  nlohmann::json doc = nlohmann::json::parse(js.str());
  REQUIRE(doc.is_array());
  REQUIRE(doc.size() == 4);
  CHECK(doc[0]["snp_id"] == "rs_b");
  CHECK(doc[0]["method"] == "mcm");
  CHECK(doc[0]["p_value"] == doctest::Approx(0.002));
  REQUIRE(doc[2]["flags"].is_array());
  CHECK(doc[2]["flags"][0] == "degenerate");
  CHECK(doc[0]["flags"].empty());
}

TEST_CASE("power table emits the full column set") {
  PowerGridPoint pt;
  pt.maf = 0.25;
  pt.n_total = 100;
  pt.pattern = Pattern::dominant;
  pt.delta = 0.5;
  QmcConfig cfg;
  std::vector<PowerTableRow> rows = power_table({pt}, 0.05, 1.0, 0, 1, cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].sizes == std::array<int, 3>{56, 37, 7});
  CHECK(std::abs(rows[0].beta_t - 0.328) < 0.01);
  CHECK(rows[0].priority == 2);
  CHECK(rows[0].rtp_draws == 0);

  std::ostringstream out;
  write_power_table(out, rows);
  std::istringstream lines(out.str());
  std::string header, row;
  std::getline(lines, header);
  CHECK(header ==
        "maf,n_total,n0,n1,n2,pattern,delta,u_alpha,v_alpha,"
        "kinv_1,kinv_2,kinv_3,thr_s_1,thr_s_2,thr_s_3,"
        "lambda_t_1,lambda_t_2,lambda_t_3,beta_t,beta_t_err,beta_s,beta_s_err,"
        "priority_index,rtp_t,rtp_t_se,rtp_s,rtp_s_se,rtp_draws");
  std::getline(lines, row);
  CHECK(row.substr(0, 20) == "0.25,100,56,37,7,dom");
  CHECK(row.substr(row.size() - 6) == ",,,,,0");  // no rtp columns when draws = 0
}

TEST_CASE("toml subset parser handles the supported shapes") {
  std::istringstream in(
      "# leading comment\n"
      "[[scenario]]\n"
      "table = \"S1\"  # trailing comment\n"
      "maf = 0.25\n"
      "n = 100\n"
      "flag = true\n"
      "methods = [\"mcm\", \"kw\"]\n"
      "deltas = [0.25, 0.5, 1.0]\n"
      "\n"
      "[settings]\n"
      "note = \"a # inside quotes stays\"\n");
  auto sections = parse_toml_subset(in);
  REQUIRE(sections.size() == 2);
  CHECK(sections[0].first == "scenario");
  const TomlTable& t = sections[0].second;
  CHECK(std::get<std::string>(t.at("table")) == "S1");
  CHECK(std::get<double>(t.at("maf")) == doctest::Approx(0.25));
  CHECK(std::get<double>(t.at("n")) == doctest::Approx(100));
  CHECK(std::get<bool>(t.at("flag")) == true);
  CHECK(std::get<std::vector<std::string>>(t.at("methods")) ==
        std::vector<std::string>{"mcm", "kw"});
  CHECK(std::get<std::vector<double>>(t.at("deltas")) ==
        std::vector<double>{0.25, 0.5, 1.0});
  CHECK(std::get<std::string>(sections[1].second.at("note")) ==
        "a # inside quotes stays");

  std::istringstream bad("key = [1,,2]\n");
  CHECK_THROWS_AS(parse_toml_subset(bad), MalformedRow);
}

TEST_CASE("manifest scenarios inherit defaults and compose labels") {
  const char* path = "manifest_io_test.toml";
  {
    std::ofstream f(path);
    f << "[[scenario]]\n"
         "table = \"S1\"\n"
         "label = \"null cell\"\n"
         "maf = 0.25\n"
         "n = 100\n"
         "pattern = \"null\"\n"
         "delta = 0\n"
         "methods = [\"mcm\", \"kw\"]\n"
         "reps = 500\n"
         "alpha = 0.01\n"
         "seed = 9\n"
         "tail = \"one\"\n"
         "\n"
         "[[scenario]]\n"
         "table = \"S2\"\n"
         "maf = 0.12\n"
         "n = 300\n"
         "pattern = \"dominant\"\n"
         "delta = 0.5\n"
         "\n"
         "[[bench]]\n"
         "maf = 0.33\n"
         "n = 300\n"
         "pattern = \"valley\"\n"
         "delta = 0.25\n";
  }
  std::vector<ManifestScenario> entries = load_manifest(path);
  std::remove(path);
  REQUIRE(entries.size() == 3);

  CHECK(entries[0].table == "S1");
  CHECK(entries[0].label == "null cell");
  CHECK(entries[0].config.pattern == Pattern::null_pattern);
  CHECK(entries[0].config.methods == std::vector<Method>{Method::mcm, Method::kw});
  CHECK(entries[0].config.reps == 500);
  CHECK(entries[0].config.alpha == doctest::Approx(0.01));
  CHECK(entries[0].config.seed == 9);
  CHECK(entries[0].config.tail == Tail::one);

  CHECK(entries[1].config.maf == doctest::Approx(0.12));
  CHECK(entries[1].config.methods ==
        std::vector<Method>{Method::mcm, Method::mmcm, Method::kw});
  CHECK(entries[1].config.tail == Tail::two);
  CHECK(entries[1].label == "S2 dominant delta=0.5 maf=0.12 n=300");

  CHECK(entries[2].table == "T2");
  CHECK(entries[2].config.methods == std::vector<Method>{Method::pmmcm, Method::mmcm});
}

TEST_CASE("metrics and bench writers emit stable headers") {
  ScenarioMetrics m;
  m.config.maf = 0.25;
  m.config.n_total = 100;
  m.config.pattern = Pattern::dominant;
  m.config.delta = 0.5;
  m.sizes = {56, 37, 7};
  m.reps = 100;
  MethodMetrics& mm = m.per_method[Method::mcm];
  mm.n_p = 20;
  mm.n_tp = 10;
  mm.selected = {5, 12, 3};
  mm.seconds = 0.5;
  MethodMetrics& kw = m.per_method[Method::kw];
  kw.n_p = 15;

  std::ostringstream out;
  write_metrics_csv(out, {{"cell one", m}});
  std::istringstream lines(out.str());
  std::string header, row;
  std::getline(lines, header);
  CHECK(header ==
        "label,maf,n_total,n0,n1,n2,pattern,delta,tail,alpha,seed,reps,"
        "method,n_p,n_tp,r_p_hat,r_tp_hat,selected_counts,seconds");
  std::getline(lines, row);
  CHECK(row.find("cell one,0.25,100,56,37,7,dominant,0.5,") == 0);
  CHECK(row.find(",mcm,20,10,0.2,0.1,5;12;3,") != std::string::npos);
  std::getline(lines, row);
  CHECK(row.find(",kw,15,0,0.15,,,0") != std::string::npos);  // kw claims no pattern

  BenchRow b;
  b.scenario = "dominant delta=1 maf=0.5 n=300";
  b.method = Method::pmmcm;
  b.reps = 100;
  b.total_seconds = 2.5;
  b.mean_resamples = 1234.5;
  std::ostringstream bout;
  write_bench_csv(bout, {b});
  std::istringstream blines(bout.str());
  std::string comment, bheader, brow;
  std::getline(blines, comment);
  CHECK(comment.rfind("# wall-clock seconds", 0) == 0);
  std::getline(blines, bheader);
  CHECK(bheader == "scenario,method,reps,total_seconds,seconds_per_test,mean_resamples");
  std::getline(blines, brow);
  CHECK(brow.find("pmmcm,100,2.5,0.025,1234.5") != std::string::npos);
}

TEST_CASE("thread budget respects the environment override") {
  setenv("MAXCON_THREADS", "3", 1);
  CHECK(thread_budget() == 3);
  setenv("MAXCON_THREADS", "0", 1);
  CHECK(thread_budget() >= 1);
  unsetenv("MAXCON_THREADS");
  CHECK(thread_budget() >= 1);
}
