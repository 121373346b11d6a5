#pragma once

#include "setid/linalg.hpp"

#include <functional>
#include <string>
#include <vector>

namespace setid {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
};

// Parameter vector with bounds. `friction_block` lists the indices of the
// friction parameters (theta_2); every other index belongs to theta_1.
struct ParamVector {
  std::vector<std::string> names;
  Vector values;
  std::vector<Interval> bounds;
  std::vector<int> friction_block;

  int size() const { return static_cast<int>(values.size()); }
  bool within_bounds() const;
  std::vector<int> structural_block() const;
  int index_of(const std::string& name) const;  // -1 if absent
  ParamVector with_values(const Vector& v) const;
  // Throws InvalidArgument when an invariant fails.
  void validate() const;
};

// Matrices of G X_t = F E_t X_{t+1} + H X_{t-1} + L Z_t, Z_t = R Z_{t-1} + e_t,
// Var(e_t) = Sigma, observables Y_t = C0 X_t (+ v_t, Var(v_t) = Sigma_v).
struct ModelMatrices {
  Matrix G, F, H, L, R, Sigma, C0, Sigma_v;
};

struct ModelSpec {
  int n_x = 0;
  int n_z = 0;
  int n_y = 0;
  ParamVector params;
  std::function<ModelMatrices(const Vector& theta)> matrix_map;
  std::vector<int> friction_signs;  // per observable, in {+1, -1, 0}
  std::vector<std::string> state_names;
  std::vector<std::string> shock_names;
  std::vector<std::string> observable_names;

  // Evaluates the matrices, fills zero defaults for empty H, C0 (identity
  // when n_y == n_x) and Sigma_v, and checks dimensions.
  ModelMatrices evaluate(const Vector& theta) const;

  // Checks dimensions, Sigma PSD and stability of R at `samples` random
  // points within the bounds (plus the current values).
  void validate(int samples = 16, unsigned seed = 7) const;
};

struct SolveOptions {
  double tol_solve = 1e-8;
  double cond_max = 1e12;
  double unit_margin = 1e-8;
};

struct Solution {
  Matrix P_star;
  Matrix Q_star;
  ParamVector theta;
  ModelMatrices mats;
  double residual_P = 0.0;
  double residual_Q = 0.0;
};

Solution solve_re(const ModelMatrices& m, const SolveOptions& opt = {});
Solution solve_re(const ModelSpec& spec, const ParamVector& theta, const SolveOptions& opt = {});

// Residual of the expectational equation along a path: for each t >= 1,
// G X_t - F (P X_t + Q R Z_t) - H X_{t-1} - L Z_t. Returns the max abs entry.
double law_of_motion_residual(const Solution& sol, const Matrix& x_path, const Matrix& z_path);

struct RiccatiOptions {
  double tol = 1e-10;
  int max_iters = 10000;
};

struct StateSpace {
  Matrix A, B, C;
  Matrix Sigma_e;   // shock covariance
  Matrix Sigma_v;   // measurement noise covariance
  Matrix K;         // steady-state gain (innovation form)
  Matrix Sigma_a;   // steady-state innovation covariance
  Matrix P_pred;    // steady-state prediction covariance
  int riccati_iterations = 0;
  bool lci3_nonsingular = false;  // D Sigma_e D' nonsingular, D = C B
  bool augmented = false;         // state is (X; Z)

  int n_state() const { return static_cast<int>(A.rows()); }
  int n_obs() const { return static_cast<int>(C.rows()); }
};

// Steady-state prediction covariance and gain by iterating the Riccati
// recursion from the stationary covariance.
void steady_state_gain(StateSpace& ss, const RiccatiOptions& opt = {});

StateSpace assemble_state_space(const Solution& sol, const RiccatiOptions& opt = {});
StateSpace assemble_state_space(const Solution& sol, const ModelSpec& spec,
                                const RiccatiOptions& opt = {});

struct IdentificationReport {
  int rank = 0;
  int required = 0;
  bool identified = false;
  Matrix jacobian;  // columns: theta (finite differences), then vec(E) for T = I + E
  Vector singular_values;
  bool controllable = false;  // diagnostic only
  bool observable = false;    // diagnostic only
};

struct IdentificationOptions {
  double rank_tol = 1e-7;
  double eps_scale = 1e-6;  // eps_i = eps_scale * (1 + |theta_i|)
  SolveOptions solve;
  RiccatiOptions riccati;
};

// Reduced-form map delta(theta, T) = (vec T A T^-1, vec T K, vec C T^-1, vech Sigma_a).
Vector reduced_form_vector(const StateSpace& ss);

IdentificationReport check_local_identification(const ModelSpec& spec, const ParamVector& theta,
                                                const IdentificationOptions& opt = {});

}  // namespace setid
