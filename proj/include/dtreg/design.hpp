#ifndef DTREG_DESIGN_HPP
#define DTREG_DESIGN_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <vector>

#include "dtreg/dataset.hpp"
#include "dtreg/errors.hpp"

namespace dtreg {

/// Declarative covariate transform: intercept, per-column polynomial degree,
/// and optional pairwise interactions between the raw columns.
struct TransformSpec {
  bool intercept = true;
  std::vector<int> degree;            // per raw column; empty means degree 1 everywhere
  bool pairwise_interactions = false;

  bool operator==(const TransformSpec&) const = default;
};

struct DesignMatrix {
  Eigen::MatrixXd t;  // n x d transformed covariates
  TransformSpec spec;
  std::vector<std::string> column_names;
  std::vector<std::string> warnings;

  Eigen::Index d() const { return t.cols(); }
};

/// Builds the transformed design row-wise.  Column order: intercept (when
/// requested), then powers 1..degree[c] per raw column, then pairwise
/// products in (a, b) order with a < b.  Pure: identical inputs give
/// bit-identical outputs.
inline DesignMatrix build_design_matrix(
    const Dataset& data, const TransformSpec& spec,
    const std::vector<std::string>& covariate_names = {}) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();

  std::vector<int> degree = spec.degree;
  if (degree.empty()) degree.assign(static_cast<size_t>(p), 1);
  if (static_cast<Eigen::Index>(degree.size()) != p) {
    throw ConfigError("UnknownColumn: transform names " +
                      std::to_string(degree.size()) +
                      " covariate columns but the dataset has " +
                      std::to_string(p));
  }
  for (int deg : degree) {
    if (deg < 1) throw ConfigError("polynomial degree must be >= 1");
  }

  auto name_of = [&](Eigen::Index c) {
    if (c < static_cast<Eigen::Index>(covariate_names.size())) {
      return covariate_names[static_cast<size_t>(c)];
    }
    return "x" + std::to_string(c + 1);
  };

  Eigen::Index d = spec.intercept ? 1 : 0;
  for (int deg : degree) d += deg;
  if (spec.pairwise_interactions) d += p * (p - 1) / 2;
  if (d == 0) throw ConfigError("transform produces an empty design");

  DesignMatrix out;
  out.spec = spec;
  out.spec.degree = degree;
  out.t.resize(n, d);
  Eigen::Index col = 0;
  if (spec.intercept) {
    out.t.col(col).setOnes();
    out.column_names.push_back("1");
    ++col;
  }
  for (Eigen::Index c = 0; c < p; ++c) {
    Eigen::VectorXd power = data.x.col(c);
    for (int deg = 1; deg <= degree[static_cast<size_t>(c)]; ++deg) {
      out.t.col(col) = power;
      out.column_names.push_back(
          deg == 1 ? name_of(c) : name_of(c) + "^" + std::to_string(deg));
      ++col;
      if (deg < degree[static_cast<size_t>(c)]) {
        power = power.cwiseProduct(data.x.col(c));
      }
    }
  }
  if (spec.pairwise_interactions) {
    for (Eigen::Index a = 0; a < p; ++a) {
      for (Eigen::Index b = a + 1; b < p; ++b) {
        out.t.col(col) = data.x.col(a).cwiseProduct(data.x.col(b));
        out.column_names.push_back(name_of(a) + "*" + name_of(b));
        ++col;
      }
    }
  }

  // zero-variance non-intercept columns fit but cannot identify a slope
  Eigen::Index first = spec.intercept ? 1 : 0;
  for (Eigen::Index c = first; c < d; ++c) {
    double lo = out.t.col(c).minCoeff();
    double hi = out.t.col(c).maxCoeff();
    if (lo == hi) {
      out.warnings.push_back("DegenerateColumn: design column '" +
                             out.column_names[static_cast<size_t>(c)] +
                             "' has zero variance");
    }
  }
  Eigen::Index min_arm =
      *std::min_element(data.arm_counts.begin(), data.arm_counts.end());
  if (d > min_arm - 1) {
    out.warnings.push_back("design has d=" + std::to_string(d) +
                           " columns but the smallest arm has only " +
                           std::to_string(min_arm) + " observations");
  }
  return out;
}

}  // namespace dtreg

#endif  // DTREG_DESIGN_HPP
