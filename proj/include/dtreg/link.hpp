#ifndef DTREG_LINK_HPP
#define DTREG_LINK_HPP

#include <cmath>
#include <string>

#include "dtreg/errors.hpp"

namespace dtreg {

/// Canonical links for the per-threshold binary regressions: the logistic
/// CDF paired with the Bernoulli likelihood, and the identity paired with
/// least squares.  Both satisfy the in-sample balance identity at the
/// optimum, which the regression adjustment relies on.
enum class Link { logit, linear };

inline double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double link_eval(Link link, double eta) {
  return link == Link::logit ? sigmoid(eta) : eta;
}

inline Link parse_link(const std::string& name) {
  if (name == "logit") return Link::logit;
  if (name == "linear" || name == "ols" || name == "identity") return Link::linear;
  if (name == "probit") {
    throw ConfigError(
        "probit is not supported: it is not a canonical link, so the "
        "in-sample balance identity fails and the adjustment would be "
        "biased; use logit or linear");
  }
  throw ConfigError("unknown link '" + name + "' (expected logit or linear)");
}

inline std::string link_name(Link link) {
  return link == Link::logit ? "logit" : "linear";
}

}  // namespace dtreg

#endif  // DTREG_LINK_HPP
