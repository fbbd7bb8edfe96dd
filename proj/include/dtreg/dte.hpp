#ifndef DTREG_DTE_HPP
#define DTREG_DTE_HPP

// Umbrella header: distributional treatment effects with regression
// adjustment via distributional regression, exchangeable-bootstrap
// inference, and the Monte Carlo study harness.

#include "dtreg/analysis.hpp"
#include "dtreg/bootstrap.hpp"
#include "dtreg/csv.hpp"
#include "dtreg/curves.hpp"
#include "dtreg/dataset.hpp"
#include "dtreg/design.hpp"
#include "dtreg/dr_fit.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/grid.hpp"
#include "dtreg/link.hpp"
#include "dtreg/selftest.hpp"
#include "dtreg/simulation.hpp"
#include "dtreg/stats.hpp"
#include "dtreg/svg.hpp"

#endif  // DTREG_DTE_HPP
