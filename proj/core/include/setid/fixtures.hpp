#pragma once

#include "setid/model_core.hpp"

#include <cstdint>
#include <vector>

namespace setid {

// Random model with a known unique stable solvent P0: G = F (P0 + U),
// H = G P0 - F P0^2 where every eigenvalue of U exceeds `unstable_min` in
// modulus and rho(P0) <= stable_max.
struct RandomModel {
  ModelMatrices mats;
  Matrix P0;
};
RandomModel random_stable_model(int n_x, int n_z, std::uint64_t seed, double stable_max = 0.9,
                                double unstable_min = 1.1);

// Consumption economy with a liquidity constraint:
// c_{t+1} = mu0 c_t + e_{t+1} + chi_t (lambda1 c_t + lambda2 e_{t+1}),
// chi_t = 1(c_t > 0), e ~ N(0, sigma^2).
struct LiquidityEconomy {
  double mu0 = 0.5;
  double lambda1 = 0.2;
  double lambda2 = 1.3;
  double sigma = 1.0;
  int burn_in = 500;
};
struct LiquiditySample {
  Vector c;    // consumption, length T
  Vector chi;  // chi_t = 1(c_t > 0)
};
LiquiditySample simulate_liquidity_economy(const LiquidityEconomy& econ, int T, std::uint64_t seed);

// Frictionless model X_t = mu X_{t-1} + Z_t, observed without noise.
// Parameter "mu" with bounds [lo, hi].
ModelSpec liquidity_model_spec(double sigma = 1.0, double lo = 0.0, double hi = 2.0);

// Upper endpoint of {mu : mean((c_t - mu c_{t-1}) c_{t-1}^+) >= 0}.
double liquidity_upper_endpoint(const Vector& c);

// Size/power fixture: set wedges e_k = y - theta_k x on a theta grid with
// x = 1 + U(0,1), y = 0.5 x + N(0,1); complete-model wedge
// p = center + N(0,1). The population envelope is [-0.45, 0.45].
struct EnvelopeFixture {
  Matrix p_series;                // T x 1
  std::vector<Matrix> set_series; // T x 1 each
};
EnvelopeFixture make_envelope_fixture(int T, double center, std::uint64_t seed, int grid = 13);

// Regression with a mismeasured regressor: X1 = X* + nu, Y = 0.2 + X* + eps,
// X* ~ N(0,1), nu ~ N(0, sd_nu^2), eps ~ N(0, var_eps). The analyst assumes
// measurement-error variance `assumed_var`.
struct MeasurementErrorDesign {
  double intercept = 0.2;
  double sd_nu = 0.2;
  double var_eps = 0.1;
  double assumed_var = 0.25;
};
struct MeasurementErrorSample {
  Vector x1, y;
};
MeasurementErrorSample simulate_measurement_error(const MeasurementErrorDesign& d, int T, std::uint64_t seed);

// d = beta_m - beta_ols, with beta_m the errors-in-variables correction
// under the assumed variance. Counts weight the observations (empty: all 1).
double measurement_error_gap(const MeasurementErrorSample& s, double assumed_var, const Vector& counts = Vector());

// Influence-function series of the gap, for its delta-method variance.
Vector measurement_error_influence(const MeasurementErrorSample& s, double assumed_var);

}  // namespace setid
