#ifndef DTREG_GRID_HPP
#define DTREG_GRID_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtreg/dataset.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/stats.hpp"

namespace dtreg {

enum class GridKind { discrete_support, quantile, user };

/// Threshold-grid request.  kind == nullopt picks a default: full discrete
/// support for discrete-looking outcomes (integer-valued or at most 200
/// distinct values), otherwise `count` quantile-spaced thresholds between
/// the pooled [lower_prob, upper_prob] quantiles.
struct GridSpec {
  std::optional<GridKind> kind;
  int count = 100;                                   // quantile grid size
  double lower_prob = 0.02;
  double upper_prob = 0.98;
  std::optional<std::pair<double, double>> range;    // truncation, discrete kind
  std::vector<double> values;                        // user kind
};

struct ThresholdGrid {
  std::vector<double> values;  // strictly increasing
  GridKind kind = GridKind::user;
  // true when every observed outcome is <= the last threshold, so a CDF on
  // this grid reaches 1 at the top; PTE uses this to extend beyond the grid.
  bool covers_full_support = false;
  std::vector<std::string> warnings;

  std::size_t size() const { return values.size(); }

  bool same_values(const ThresholdGrid& other) const {
    return values == other.values;
  }
};

namespace detail {

inline std::vector<double> sorted_outcomes(const Dataset& data) {
  std::vector<double> ys(data.y.data(), data.y.data() + data.y.size());
  std::sort(ys.begin(), ys.end());
  return ys;
}

inline bool looks_discrete(const std::vector<double>& sorted,
                           std::size_t unique_count) {
  if (unique_count <= 200) return true;
  for (double v : sorted) {
    if (v != std::floor(v)) return false;
  }
  return true;
}

}  // namespace detail

inline ThresholdGrid make_threshold_grid(const Dataset& data,
                                         const GridSpec& spec) {
  std::vector<double> sorted = detail::sorted_outcomes(data);
  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  GridKind kind;
  if (spec.kind.has_value()) {
    kind = *spec.kind;
  } else {
    kind = detail::looks_discrete(sorted, uniq.size()) ? GridKind::discrete_support
                                                       : GridKind::quantile;
  }

  ThresholdGrid grid;
  grid.kind = kind;
  switch (kind) {
    case GridKind::discrete_support: {
      grid.values = uniq;
      if (spec.range.has_value()) {
        auto [lo, hi] = *spec.range;
        std::erase_if(grid.values, [&](double v) { return v < lo || v > hi; });
        if (grid.values.empty()) {
          throw ConfigError("grid truncation range [" + std::to_string(lo) +
                            ", " + std::to_string(hi) +
                            "] excludes every observed outcome");
        }
      }
      grid.covers_full_support = grid.values.back() >= sorted.back();
      if (uniq.size() == 1) {
        grid.warnings.push_back(
            "SingletonSupport: all outcomes are identical; grid has one point");
      }
      break;
    }
    case GridKind::quantile: {
      if (spec.count < 1) throw ConfigError("quantile grid needs count >= 1");
      if (!(spec.lower_prob > 0.0 && spec.upper_prob < 1.0 &&
            spec.lower_prob <= spec.upper_prob)) {
        throw ConfigError("quantile grid bounds must satisfy 0 < lo <= hi < 1");
      }
      grid.values.reserve(static_cast<size_t>(spec.count));
      for (int j = 0; j < spec.count; ++j) {
        double t = spec.count == 1
                       ? spec.lower_prob
                       : spec.lower_prob + (spec.upper_prob - spec.lower_prob) *
                                               static_cast<double>(j) /
                                               static_cast<double>(spec.count - 1);
        grid.values.push_back(quantile_sorted(sorted, t));
      }
      std::sort(grid.values.begin(), grid.values.end());
      grid.values.erase(std::unique(grid.values.begin(), grid.values.end()),
                        grid.values.end());
      grid.covers_full_support = grid.values.back() >= sorted.back();
      if (uniq.size() == 1) {
        grid.warnings.push_back(
            "SingletonSupport: all outcomes are identical; grid has one point");
      }
      break;
    }
    case GridKind::user: {
      if (spec.values.empty()) {
        throw ConfigError("EmptySpec: user-supplied grid has no values");
      }
      grid.values = spec.values;
      for (double v : grid.values) {
        if (!std::isfinite(v)) throw ConfigError("grid value is not finite");
      }
      std::sort(grid.values.begin(), grid.values.end());
      grid.values.erase(std::unique(grid.values.begin(), grid.values.end()),
                        grid.values.end());
      grid.covers_full_support = grid.values.back() >= sorted.back();
      break;
    }
  }
  return grid;
}

}  // namespace dtreg

#endif  // DTREG_GRID_HPP
