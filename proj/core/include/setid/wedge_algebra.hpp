#pragma once

#include "setid/model_core.hpp"

#include <map>
#include <random>
#include <string>
#include <vector>

namespace setid {

struct WedgeLaw {
  Matrix Gamma;
  std::vector<int> sign_mu;      // direction of the mean distortion per equation
  std::vector<int> sign_lambda;  // derived direction per state
};

struct LambdaResult {
  Vector lambda;
  std::vector<int> sign;      // per coordinate, 0 when |lambda_i| <= 1e-12
  bool used_pinv = false;
  double residual = 0.0;      // || (F Gamma - G) lambda + mu ||_inf
};

struct MuToLambdaOptions {
  bool allow_pinv = false;
  double rank_tol = 1e-10;
};

// Solves (F Gamma - G) lambda = -mu for the mean decision-rule distortion.
LambdaResult mu_to_lambda(const Matrix& F, const Matrix& G, const Matrix& Gamma, const Vector& mu_mean,
                          const MuToLambdaOptions& opt = {});
LambdaResult mu_to_lambda(const ModelSpec& spec, const ParamVector& theta1, const Matrix& Gamma,
                          const Vector& mu_mean, const MuToLambdaOptions& opt = {});

// Builds a WedgeLaw, checking stability of Gamma and deriving sign_lambda
// from sign_mu through the linear map.
WedgeLaw make_wedge_law(const Matrix& F, const Matrix& G, const Matrix& Gamma,
                        const std::vector<int>& sign_mu);

// Default persistence Gamma = rho I with rho the pooled AR(1) coefficient
// of the columns of `residuals`, clipped to (-0.99, 0.99).
Matrix default_gamma(const Matrix& residuals, int n_x);

enum class EconomyId { LiquidityConstraint, AdjustmentCost, Irreversibility, NonRationalExp };

using Calibration = std::map<std::string, double>;

// Direction of the friction moment (wedge times capital instrument for the
// investment economies, Euler residual times instrument for the liquidity
// constraint). Throws CalibrationOutsideValidRegion when the calibration
// leaves the region where the direction is established.
int sign_fixture(EconomyId economy, const Calibration& calibration);

// Simulated wedge and instrument series for the investment economies.
struct FixtureSample {
  Vector wedge;       // lambda_t
  Vector instrument;  // K_t
};

// Frictionless stable root and shock loading of the investment equation
// (s/alpha) E I_{t+1} - b I_t + I_{t-1} = Z_t / alpha.
struct InvestmentRule {
  double rho1 = 0.0;  // stable root
  double rho2 = 0.0;  // unstable root
};
InvestmentRule investment_roots(double alpha, double s_bar, double omega);

FixtureSample simulate_adjustment_cost(const Calibration& c, int T, std::uint64_t seed);
FixtureSample simulate_capital_constraint(const Calibration& c, int T, std::uint64_t seed);
FixtureSample simulate_irreversibility(const Calibration& c, int T, std::uint64_t seed);
FixtureSample simulate_non_rational(const Calibration& c, int T, std::uint64_t seed);

// Coefficients of the capital-constraint investment polynomial
// gamma1 E I_{t+1} - (1 + gamma1 + (1 - alpha) gamma3) I_t + I_{t-1} = gamma2 Z_t.
struct CapitalConstraintGammas {
  double g1, g2, g3;
};
CapitalConstraintGammas capital_constraint_gammas(double alpha, double s_bar, double omega,
                                                  double beta, double psi1, double psi2);

}  // namespace setid
