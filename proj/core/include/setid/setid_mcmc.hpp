#pragma once

#include "setid/model_core.hpp"
#include "setid/moments.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace setid {

struct Criterion {
  double value = 0.0;  // L_n = n q+' W q+
  Vector q_plus;
  Matrix W;
  bool zero = false;   // value <= tol_crit
};

Criterion eval_criterion(const MomentSystem& ms, double tol_crit = 1e-10);

// theta -> L_n(theta); +infinity marks an infeasible point.
using CriterionFn = std::function<double(const Vector& theta)>;
using MomentFactory = std::function<MomentSystem(const Vector& theta)>;

// Wraps a moment factory; solver failures map to +infinity.
CriterionFn criterion_from_factory(MomentFactory factory);

struct McmcConfig {
  int chains = 4;
  int steps = 20000;       // per chain, including burn-in
  int burn_in = 5000;      // per chain
  long retained = 250000;  // total over chains, last draws kept
  std::uint64_t seed = 42;
  int workers = 1;
  std::vector<std::vector<int>> blocks;  // empty: one block with all coordinates
  Vector initial;                        // empty: search the prior
  double target_accept = 0.3;
  int adapt_every = 100;
};

struct IdentifiedSetDraws {
  Matrix draws;   // M x n_theta
  Vector crit;    // L_n at each draw
  std::vector<std::string> names;
  std::vector<Interval> bounds;
  long n_obs = 0;  // sample size behind the criterion
  double acceptance_rate = 0.0;
  std::vector<double> chain_acceptance;
  std::vector<std::vector<int>> blocks;
  std::vector<Vector> proposal_scales;  // per chain, per coordinate
  int burn_in = 0;
  std::vector<std::string> warnings;
};

IdentifiedSetDraws run_mcmc(const CriterionFn& crit, const ParamVector& prior, const McmcConfig& config,
                            long n_obs = 0);

struct CutoffSweepRow {
  std::string rule;
  double nu = 0.0;
  long members = 0;
  Vector lower;
  Vector upper;
};

struct SetEstimate {
  double cutoff = 0.0;
  std::vector<bool> mask;  // membership in A_n
  long members = 0;
  Vector lower, upper;     // per-coordinate hull of A_n
  Matrix cs_quantiles;     // n_theta x 2: 2.5% and 97.5% of the retained draws
  std::vector<CutoffSweepRow> sweep;
};

// Named cutoff rules, evaluated at n: "log log n", "log n", "2 log n", "sqrt n".
double cutoff_value(const std::string& rule, long n);

SetEstimate extract_set(const IdentifiedSetDraws& draws, double nu,
                        const std::vector<std::string>& sweep_rules = {"log n", "2 log n", "sqrt n"});

// "name,lo,hi" with three decimals.
std::string format_quantile_row(const std::string& name, double lo, double hi);

}  // namespace setid
