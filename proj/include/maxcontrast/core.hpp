#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace maxcontrast {

// ---------- error types ----------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonPositiveValue : Error {
  std::size_t group, index;
  NonPositiveValue(std::size_t g, std::size_t i)
      : Error("non-positive value in group " + std::to_string(g) +
              " at index " + std::to_string(i)),
        group(g), index(i) {}
};

struct RowSumNonZero : Error {
  std::size_t row;
  explicit RowSumNonZero(std::size_t k)
      : Error("contrast row " + std::to_string(k) + " does not sum to zero"),
        row(k) {}
};

struct ZeroRow : Error {
  std::size_t row;
  explicit ZeroRow(std::size_t k)
      : Error("contrast row " + std::to_string(k) + " is all zero"), row(k) {}
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct DegenerateVariance : Error {
  DegenerateVariance() : Error("pooled variance undefined: zero degrees of freedom") {}
};

struct EmptyGroup : Error {
  std::size_t group;
  explicit EmptyGroup(std::size_t i)
      : Error("group " + std::to_string(i) + " is empty"), group(i) {}
};

struct ZeroVariance : Error {
  ZeroVariance() : Error("pooled variance is zero") {}
};

struct AllTied : Error {
  AllTied() : Error("all observations are equal") {}
};

// ---------- data model ----------

enum class Scale { raw, log };

struct GroupedDataset {
  std::vector<std::vector<double>> groups;
  Scale scale = Scale::raw;

  std::size_t group_count() const { return groups.size(); }
  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
  }
};

// m x a matrix of contrast coefficients; every row sums to zero.
struct ContrastMatrix {
  Eigen::MatrixXd coef;                 // m rows, a columns
  std::vector<std::string> row_names;   // optional pattern labels

  std::size_t rows() const { return static_cast<std::size_t>(coef.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(coef.cols()); }
  Eigen::RowVectorXd row(std::size_t k) const { return coef.row(static_cast<Eigen::Index>(k)); }
  std::string name(std::size_t k) const {
    return k < row_names.size() ? row_names[k] : "c" + std::to_string(k + 1);
  }
};

struct GroupSummary {
  Eigen::VectorXd means;      // per-group sample means
  double pooled_variance = 0; // V
  long dof = 0;               // gamma = sum(n_i - 1)
  Eigen::VectorXd inv_sizes;  // D diagonal, 1/n_i
};

// ---------- operations ----------

GroupedDataset log_transform(const GroupedDataset& ds);

// additive (-1/2, 0, 1/2), dominant (-1/3, -1/3, 2/3), recessive (-2/3, 1/3, 1/3)
ContrastMatrix default_pg_contrasts();

// Returns its argument when all rows sum to zero (1e-12 absolute) and none is
// all-zero; throws otherwise.
const ContrastMatrix& validate_contrasts(const ContrastMatrix& c);

GroupSummary summarize(const GroupedDataset& ds);

// [C; -C], used for two-sided testing. Row names gain +/- prefixes.
ContrastMatrix augment_two_sided(const ContrastMatrix& c);

}  // namespace maxcontrast
