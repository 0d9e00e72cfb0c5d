#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <maxcontrast/tests.hpp>

using namespace maxcontrast;

namespace {

// group sizes (56, 37, 7), means (-1/6, -1/6, 1/3), pooled variance 1
GroupSummary hwe25_summary() {
  GroupSummary s;
  s.means.resize(3);
  s.means << -1.0 / 6, -1.0 / 6, 1.0 / 3;
  s.pooled_variance = 1.0;
  s.dof = 97;
  s.inv_sizes.resize(3);
  s.inv_sizes << 1.0 / 56, 1.0 / 37, 1.0 / 7;
  return s;
}

GroupedDataset make_ds(std::vector<std::vector<double>> groups) {
  GroupedDataset ds;
  ds.groups = std::move(groups);
  return ds;
}

double perm_se(double p, double r) { return std::sqrt(p * (1.0 - p) / r); }

}  // namespace

TEST_CASE("method names round-trip") {
  for (Method m : {Method::mcm, Method::mmcm, Method::pmmcm, Method::kw})
    CHECK(method_from_name(method_name(m)) == m);
  CHECK_THROWS_AS(method_from_name("anova"), Error);
}

TEST_CASE("compute_T reproduces the reference statistics") {
  GroupSummary s = hwe25_summary();
  ContrastMatrix c = default_pg_contrasts();
  StatisticVector t = compute_T(s, c);
  REQUIRE(t.values.size() == 3);
  CHECK(t.values[0] == doctest::Approx(1.24721912892).epsilon(1e-9));
  CHECK(t.values[1] == doctest::Approx(1.2737946688).epsilon(1e-9));
  CHECK(t.values[2] == doctest::Approx(1.017840852).epsilon(1e-9));
  CHECK(t.argmax == 2);
  CHECK(t.max_value == doctest::Approx(1.2737946688).epsilon(1e-9));
  CHECK(t.method == Method::mcm);
}

TEST_CASE("compute_S and compute_M reproduce the reference statistics") {
  GroupSummary s = hwe25_summary();
  ContrastMatrix c = default_pg_contrasts();
  StatisticVector sv = compute_S(s, c);
  CHECK(sv.values[0] == doctest::Approx(0.353553390593).epsilon(1e-9));
  CHECK(sv.values[1] == doctest::Approx(0.408248290464).epsilon(1e-9));
  CHECK(sv.values[2] == doctest::Approx(0.204124145232).epsilon(1e-9));
  CHECK(sv.argmax == 2);

  // with unit variance M equals S evaluated at the same means
  StatisticVector mv = compute_M(s.means, c);
  CHECK((mv.values - sv.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero pooled variance is rejected") {
  GroupSummary s = hwe25_summary();
  s.pooled_variance = 0.0;
  ContrastMatrix c = default_pg_contrasts();
  CHECK_THROWS_AS(compute_T(s, c), ZeroVariance);
  CHECK_THROWS_AS(compute_S(s, c), ZeroVariance);
}

TEST_CASE("sigma_T is the correlation matrix of the contrast estimates") {
  ContrastMatrix c = default_pg_contrasts();
  Eigen::VectorXd d(3);
  d << 1.0 / 56, 1.0 / 37, 1.0 / 7;
  CovarianceModel m = sigma_T(c, d);
  CHECK(m.sigma(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.sigma(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.sigma(2, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.sigma(0, 1) == doctest::Approx(0.964568511187).epsilon(1e-9));
  CHECK(m.sigma(0, 2) == doctest::Approx(0.906764700582).epsilon(1e-9));
  CHECK(m.sigma(1, 2) == doctest::Approx(0.763395128463).epsilon(1e-9));
  CHECK(m.rank == 2);
}

TEST_CASE("sigma_S keeps the unequal-size diagonal") {
  ContrastMatrix c = default_pg_contrasts();
  Eigen::VectorXd d(3);
  d << 1.0 / 56, 1.0 / 37, 1.0 / 7;
  CovarianceModel m = sigma_S(c, d);
  CHECK(m.sigma(0, 0) == doctest::Approx(0.0803571428571).epsilon(1e-9));
  CHECK(m.sigma(1, 1) == doctest::Approx(0.102718790219).epsilon(1e-9));
  CHECK(m.sigma(2, 2) == doctest::Approx(0.0402187902188).epsilon(1e-9));
  CHECK(m.sigma(0, 1) == doctest::Approx(0.087633523002).epsilon(1e-9));
  CHECK(m.sigma(0, 2) == doctest::Approx(0.0515491311776).epsilon(1e-9));
  CHECK(m.sigma(1, 2) == doctest::Approx(0.0490669240669).epsilon(1e-9));
}

TEST_CASE("equal group sizes tie T to S by a factor sqrt(n0)") {
  GroupedDataset ds = make_ds({{1.1, 2.0, 0.7}, {1.9, 2.4, 2.6}, {3.0, 3.3, 2.1}});
  GroupSummary s = summarize(ds);
  ContrastMatrix c = default_pg_contrasts();
  StatisticVector t = compute_T(s, c);
  StatisticVector sv = compute_S(s, c);
  for (int k = 0; k < 3; ++k)
    CHECK(t.values[k] == doctest::Approx(std::sqrt(3.0) * sv.values[k]).epsilon(1e-12));
  CHECK(t.argmax == sv.argmax);
}

TEST_CASE("statistics are invariant to shift, scale and contrast row scaling") {
  GroupedDataset ds = make_ds({{1.2, 0.4, 0.9, 1.4}, {1.8, 2.2}, {2.9, 3.4, 3.1}});
  ContrastMatrix c = default_pg_contrasts();
  GroupSummary base = summarize(ds);

  GroupedDataset shifted = ds;
  for (auto& g : shifted.groups)
    for (double& x : g) x += 11.25;
  GroupSummary sh = summarize(shifted);
  CHECK((compute_T(sh, c).values - compute_T(base, c).values).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((compute_S(sh, c).values - compute_S(base, c).values).cwiseAbs().maxCoeff() < 1e-10);

  GroupedDataset scaled = ds;
  for (auto& g : scaled.groups)
    for (double& x : g) x *= 7.5;
  GroupSummary sc = summarize(scaled);
  CHECK((compute_T(sc, c).values - compute_T(base, c).values).cwiseAbs().maxCoeff() < 1e-10);

  ContrastMatrix stretched = c;
  stretched.coef.row(1) *= 4.0;
  CHECK((compute_T(base, stretched).values - compute_T(base, c).values)
            .cwiseAbs().maxCoeff() < 1e-12);
  CHECK((compute_S(base, stretched).values - compute_S(base, c).values)
            .cwiseAbs().maxCoeff() < 1e-12);
  CHECK((compute_M(base.means, stretched).values - compute_M(base.means, c).values)
            .cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("max contrast tests produce matching p-values for equal sizes") {
  // with n0 = n1 = n2 both statistics order the patterns identically and the
  // one-sided p-values agree up to integration error
  GroupedDataset ds = make_ds({{0.1, -0.4, 0.3, 0.2}, {0.5, 0.9, 0.4, 0.7},
                               {1.2, 0.8, 1.5, 0.9}});
  QmcConfig cfg;
  cfg.abs_error_tol = 2e-4;
  TestResult t = max_contrast_test(ds, default_pg_contrasts(), cfg);
  TestResult s = modified_max_contrast_test(ds, default_pg_contrasts(), cfg);
  CHECK(t.selected_pattern == s.selected_pattern);
  CHECK(std::abs(t.p_value - s.p_value) < t.p_error + s.p_error + 1e-4);
  CHECK(t.selected_direction == 1);
  CHECK(!t.budget_exhausted);
  CHECK(t.p_error <= 2e-4);
}

TEST_CASE("two-sided testing finds a decreasing trend with direction -1") {
  GroupedDataset ds = make_ds({{5.1, 6.0, 5.4}, {3.2, 4.1, 3.9}, {1.0, 2.2, 1.4}});
  QmcConfig cfg;
  cfg.abs_error_tol = 5e-4;
  TestResult one = max_contrast_test(ds, default_pg_contrasts(), cfg, Tail::one);
  TestResult two = max_contrast_test(ds, default_pg_contrasts(), cfg, Tail::two);
  CHECK(one.p_value > 0.9);
  CHECK(two.p_value < 0.01);
  CHECK(two.selected_direction == -1);
  CHECK(two.selected_pattern >= 1);
  CHECK(two.selected_name.rfind("-", 0) == 0);
  CHECK(two.statistic.values.size() == 6);
}

TEST_CASE("permutation test recovers exact resampling p-values") {
  struct Exact {
    std::vector<std::vector<double>> groups;
    double m_max;
    double p;
  };
  const std::vector<Exact> cases = {
      {{{1, 2}, {3}, {4}}, 1.767766952966, 1.0 / 12},
      {{{1, 3}, {2}, {5}}, 2.449489742783, 2.0 / 12},
      {{{4}, {1, 2}, {3}}, 0.204124145232, 6.0 / 12},
      {{{3, 1}, {4, 2}, {2.5}}, 0.612372435696, 10.0 / 30},
      {{{2, 3, 5}, {1, 4}, {6}}, 2.517531124527, 4.0 / 60},
      {{{1.5, 0.5}, {2.5, 1.0}, {2.0, 0.75}}, 0.459279326772, 25.0 / 90},
  };
  ContrastMatrix c = default_pg_contrasts();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    PermutationConfig pc;
    pc.n_resamp_min = 1000;
    pc.n_resamp_max = 40000;
    pc.eps = 1e-9;  // never satisfied, so the full budget is spent
    pc.seed = 100 + i;
    TestResult r = permuted_modified_max_contrast_test(make_ds(cases[i].groups), c, pc);
    CHECK(r.statistic.max_value == doctest::Approx(cases[i].m_max).epsilon(1e-9));
    CHECK(r.resamples == 40000);
    CHECK(r.p_value == doctest::Approx(static_cast<double>(r.count_exceed) / 40000.0));
    CHECK(std::abs(r.p_value - cases[i].p) < 4.0 * perm_se(cases[i].p, 40000.0));
    CHECK(r.budget_exhausted);
  }
}

TEST_CASE("permutation comparison is strictly greater-than") {
  GroupedDataset ds = make_ds({{1.0, 1.0}, {1.0}, {1.0, 1.0}});
  PermutationConfig pc;
  pc.seed = 3;
  TestResult r = permuted_modified_max_contrast_test(ds, default_pg_contrasts(), pc);
  CHECK(r.count_exceed == 0);
  CHECK(r.p_value == 0.0);
  CHECK(r.resamples == pc.n_resamp_min + 1);  // stops as soon as the rule allows
  CHECK(!r.budget_exhausted);

  pc.add_one = true;
  TestResult smoothed = permuted_modified_max_contrast_test(ds, default_pg_contrasts(), pc);
  CHECK(smoothed.p_value ==
        doctest::Approx(1.0 / (static_cast<double>(smoothed.resamples) + 1.0)));
}

TEST_CASE("permutation test is deterministic in the seed") {
  GroupedDataset ds = make_ds({{1.2, 3.4, 0.8}, {2.2, 2.9}, {4.1, 3.3}});
  PermutationConfig pc;
  pc.n_resamp_max = 5000;
  pc.eps = 1e-9;
  pc.seed = 42;
  TestResult a = permuted_modified_max_contrast_test(ds, default_pg_contrasts(), pc);
  TestResult b = permuted_modified_max_contrast_test(ds, default_pg_contrasts(), pc);
  CHECK(a.count_exceed == b.count_exceed);
  CHECK(a.p_value == b.p_value);
  pc.seed = 43;
  TestResult c = permuted_modified_max_contrast_test(ds, default_pg_contrasts(), pc);
  CHECK(a.count_exceed != c.count_exceed);
}

TEST_CASE("permutation test refuses empty groups") {
  GroupedDataset ds = make_ds({{1.0, 2.0}, {}, {3.0}});
  PermutationConfig pc;
  CHECK_THROWS_AS(permuted_modified_max_contrast_test(ds, default_pg_contrasts(), pc),
                  EmptyGroup);
}

TEST_CASE("kruskal_wallis handles the untied reference case") {
  TestResult r = kruskal_wallis_test(make_ds({{1, 2}, {3, 4}, {5, 6}}));
  REQUIRE(r.statistic.values.size() == 1);
  CHECK(r.statistic.values[0] == doctest::Approx(4.571428571).epsilon(1e-9));
  CHECK(r.p_value == doctest::Approx(0.1017013923).epsilon(1e-8));
  CHECK(r.selected_pattern == 0);
  CHECK(r.statistic.method == Method::kw);
}

TEST_CASE("kruskal_wallis applies the tie correction") {
  // values 1,1,2,3,3,3: ranks 1.5,1.5,3,5,5,5; correction 1 - 30/210
  TestResult r = kruskal_wallis_test(make_ds({{1, 1}, {2, 3}, {3, 3}}));
  CHECK(r.statistic.values[0] == doctest::Approx(4.0 + 1.0 / 3).epsilon(1e-9));
  CHECK(r.p_value == doctest::Approx(std::exp(-r.statistic.values[0] / 2)).epsilon(1e-9));
}

TEST_CASE("kruskal_wallis skips empty groups and rejects all-tied data") {
  TestResult r = kruskal_wallis_test(make_ds({{1, 2}, {}, {3, 4}}));
  CHECK(r.statistic.values[0] == doctest::Approx(2.4).epsilon(1e-9));
  CHECK(r.p_value == doctest::Approx(std::erfc(std::sqrt(1.2))).epsilon(1e-9));

  CHECK_THROWS_AS(kruskal_wallis_test(make_ds({{2, 2}, {2}, {2, 2}})), AllTied);
  CHECK_THROWS_AS(kruskal_wallis_test(make_ds({{}, {}, {1, 2}})), EmptyGroup);
}
