#pragma once

#include "setid/linalg.hpp"
#include "setid/model_core.hpp"
#include "setid/setid_mcmc.hpp"

#include <functional>
#include <string>
#include <vector>

namespace setid {

// Solution of  min 1/2 sum_t (M_t - 1)^2  subject to
//   mean(M) = 1,
//   sum_t M_t q_tj = 0                                 (j < p, equalities)
//   sum_t M_t q_tj = sum_t q_tj - [sum_t q_tj]_+       (j >= p, inequalities)
//   M >= 0.
// Inequality columns are oriented so that a nonpositive mean needs no
// distortion.
struct PerturbationWeights {
  Vector M;
  Vector M_tilde;             // 1 - M
  double lambda1 = 0.0;       // multiplier on mean(M) = 1
  Vector lambda2;             // multipliers on the moment constraints
  Vector lambda3;             // multipliers on M >= 0
  std::vector<bool> binding;  // M_t == 0
  bool analytic_feasible = true;
  bool from_qp = false;
  double objective = 0.0;
  int iterations = 0;
};

struct QPOptions {
  double tol_kkt = 1e-8;
  int max_iter = 500;
};

// Closed form ignoring M >= 0.
PerturbationWeights solve_weights_analytic(const Matrix& q, int p);

// Full program with M >= 0. Returns the analytic solution when it is
// feasible. Throws QPInfeasible (with a certificate in the message) when
// the constraint set is empty.
PerturbationWeights solve_weights_qp(const Matrix& q, int p, const QPOptions& opt = {});

// Constraint matrix and right-hand side in the sum scale: A M = c.
void weight_constraints(const Matrix& q, int p, Matrix& A, Vector& c);

struct KKTReport {
  double primal = 0.0;         // max |A M - c| / T
  double nonneg = 0.0;         // max(-M_t, 0)
  double dual = 0.0;           // stationarity on free coordinates
  double complementarity = 0.0;
  bool ok = false;
};
KKTReport check_kkt(const Matrix& q, int p, const PerturbationWeights& w, double tol = 1e-8);

// Residual of the displayed block system
// [[I, -q~], [q', 0]] [M - 1; lambda2] = [0; -b] for the analytic solution.
double analytic_block_residual(const Matrix& q, int p, const PerturbationWeights& w);

struct WedgePaths {
  Matrix lambda;       // T x n_y, (1 - M_t) e_t
  Vector mean;         // n_y
  Vector standardized; // mean / sd(e)
  PerturbationWeights weights;
};

// Wedge paths for residual matrix e (T x n_y) with friction signs per
// column: equality observables use e_j, the others s_j e_j.
WedgePaths wedge_paths(const Matrix& residuals, const std::vector<int>& signs, const QPOptions& opt = {});

struct WedgeEnvelope {
  Vector lower_mean, upper_mean;  // per observable over the set
  Matrix lower_path, upper_path;  // T x n_y paths of the draws attaining the bounds
  Matrix median_path;
  std::vector<int> draws_used;
  std::vector<Matrix> draw_paths;  // wedge path of each used draw
  Vector theta_lower_index, theta_upper_index;
};

// theta -> residual matrix (T x n_y) of the frictionless model on the data.
using ResidualFactory = std::function<Matrix(const Vector& theta)>;

// Envelope of mean wedges over draws in the set (mask). At most max_draws
// members are used, evenly spaced through the draw order.
WedgeEnvelope wedges_from_set(const IdentifiedSetDraws& draws, const std::vector<bool>& mask,
                              const ResidualFactory& residuals, const std::vector<int>& signs,
                              int max_draws = 200, int workers = 1, const QPOptions& opt = {});

}  // namespace setid
