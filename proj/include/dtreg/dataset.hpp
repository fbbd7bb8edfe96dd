#ifndef DTREG_DATASET_HPP
#define DTREG_DATASET_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "dtreg/errors.hpp"

namespace dtreg {

/// Immutable experimental sample: outcomes, arm labels in 0..K-1, and raw
/// pre-treatment covariates.  Construct through validate_dataset.
struct Dataset {
  Eigen::VectorXd y;                    // n outcomes
  std::vector<int> w;                   // n arm labels
  Eigen::MatrixXd x;                    // n x p raw covariates
  std::vector<Eigen::Index> arm_counts; // n_k per arm
  std::string outcome_unit;             // carried as metadata only

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return x.cols(); }
  int arms() const { return static_cast<int>(arm_counts.size()); }

  double assignment_share(int k) const {
    return static_cast<double>(arm_counts[static_cast<size_t>(k)]) /
           static_cast<double>(n());
  }

  /// Row indices of arm k, in dataset order.
  std::vector<Eigen::Index> rows_of_arm(int k) const {
    std::vector<Eigen::Index> rows;
    rows.reserve(static_cast<size_t>(arm_counts[static_cast<size_t>(k)]));
    for (Eigen::Index i = 0; i < n(); ++i) {
      if (w[static_cast<size_t>(i)] == k) rows.push_back(i);
    }
    return rows;
  }
};

/// Validates raw columns and assembles a Dataset.
///
/// `declared_arms` < 0 infers K as max(label) + 1; otherwise labels must be
/// < declared_arms and every arm 0..K-1 must be non-empty.
inline Dataset validate_dataset(Eigen::VectorXd y, std::vector<int> w,
                                Eigen::MatrixXd x, int declared_arms = -1,
                                std::string outcome_unit = "") {
  const Eigen::Index n = y.size();
  if (n < 1) throw DataError("dataset is empty");
  if (static_cast<Eigen::Index>(w.size()) != n || (x.size() > 0 && x.rows() != n)) {
    throw DataError("column lengths differ: y has " + std::to_string(n) +
                    " rows, w has " + std::to_string(w.size()) + ", x has " +
                    std::to_string(x.rows()));
  }
  if (x.size() == 0) x.resize(n, 0);

  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(y[i])) {
      throw DataError("NonFinite: outcome at row " + std::to_string(i));
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!std::isfinite(x(i, j))) {
        throw DataError("NonFinite: covariate at row " + std::to_string(i) +
                        ", column " + std::to_string(j));
      }
    }
  }

  int max_label = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int label = w[static_cast<size_t>(i)];
    if (label < 0 || (declared_arms >= 0 && label >= declared_arms)) {
      throw DataError("LabelOutOfRange: arm label " + std::to_string(label) +
                      " at row " + std::to_string(i));
    }
    max_label = std::max(max_label, label);
  }
  const int k_arms = declared_arms >= 0 ? declared_arms : max_label + 1;

  std::vector<Eigen::Index> counts(static_cast<size_t>(k_arms), 0);
  for (int label : w) counts[static_cast<size_t>(label)]++;
  for (int k = 0; k < k_arms; ++k) {
    if (counts[static_cast<size_t>(k)] == 0) {
      throw DataError("EmptyArm: arm " + std::to_string(k) +
                      " has no observations");
    }
  }

  return Dataset{std::move(y), std::move(w), std::move(x), std::move(counts),
                 std::move(outcome_unit)};
}

}  // namespace dtreg

#endif  // DTREG_DATASET_HPP
