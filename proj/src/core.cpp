#include "maxcontrast/core.hpp"

#include <cmath>

namespace maxcontrast {

GroupedDataset log_transform(const GroupedDataset& ds) {
  GroupedDataset out;
  out.scale = Scale::log;
  out.groups.resize(ds.groups.size());
  for (std::size_t g = 0; g < ds.groups.size(); ++g) {
    out.groups[g].reserve(ds.groups[g].size());
    for (std::size_t i = 0; i < ds.groups[g].size(); ++i) {
      double x = ds.groups[g][i];
      if (!(x > 0)) throw NonPositiveValue(g, i);
      out.groups[g].push_back(std::log(x));
    }
  }
  return out;
}

ContrastMatrix default_pg_contrasts() {
  ContrastMatrix c;
  c.coef.resize(3, 3);
  c.coef << -1.0 / 2, 0.0, 1.0 / 2,
            -1.0 / 3, -1.0 / 3, 2.0 / 3,
            -2.0 / 3, 1.0 / 3, 1.0 / 3;
  c.row_names = {"additive", "dominant", "recessive"};
  return c;
}

const ContrastMatrix& validate_contrasts(const ContrastMatrix& c) {
  if (c.coef.rows() < 1) throw DimensionMismatch("contrast matrix has no rows");
  for (Eigen::Index k = 0; k < c.coef.rows(); ++k) {
    if (std::abs(c.coef.row(k).sum()) > 1e-12)
      throw RowSumNonZero(static_cast<std::size_t>(k) + 1);
    if (c.coef.row(k).cwiseAbs().maxCoeff() == 0.0)
      throw ZeroRow(static_cast<std::size_t>(k) + 1);
  }
  return c;
}

GroupSummary summarize(const GroupedDataset& ds) {
  const std::size_t a = ds.group_count();
  if (a < 2) throw DimensionMismatch("need at least two groups");

  GroupSummary s;
  s.means.resize(static_cast<Eigen::Index>(a));
  s.inv_sizes.resize(static_cast<Eigen::Index>(a));

  long dof = 0;
  for (std::size_t i = 0; i < a; ++i) {
    const auto& g = ds.groups[i];
    if (g.empty()) throw EmptyGroup(i);
    double mean = 0;
    for (double x : g) mean += x;
    mean /= static_cast<double>(g.size());
    s.means[static_cast<Eigen::Index>(i)] = mean;
    s.inv_sizes[static_cast<Eigen::Index>(i)] = 1.0 / static_cast<double>(g.size());
    dof += static_cast<long>(g.size()) - 1;
  }
  if (dof < 1) throw DegenerateVariance();

  double ss = 0;
  for (std::size_t i = 0; i < a; ++i) {
    double mean = s.means[static_cast<Eigen::Index>(i)];
    for (double x : ds.groups[i]) ss += (x - mean) * (x - mean);
  }
  s.dof = dof;
  s.pooled_variance = ss / static_cast<double>(dof);
  return s;
}

ContrastMatrix augment_two_sided(const ContrastMatrix& c) {
  ContrastMatrix out;
  const Eigen::Index m = c.coef.rows();
  out.coef.resize(2 * m, c.coef.cols());
  out.coef.topRows(m) = c.coef;
  out.coef.bottomRows(m) = -c.coef;
  out.row_names.reserve(2 * static_cast<std::size_t>(m));
  for (Eigen::Index k = 0; k < m; ++k)
    out.row_names.push_back("+" + c.name(static_cast<std::size_t>(k)));
  for (Eigen::Index k = 0; k < m; ++k)
    out.row_names.push_back("-" + c.name(static_cast<std::size_t>(k)));
  return out;
}

}  // namespace maxcontrast
