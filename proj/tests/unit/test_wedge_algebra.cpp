#include "doctest.h"

#include "setid/errors.hpp"
#include "setid/wedge_algebra.hpp"

#include <cmath>

using namespace setid;

TEST_CASE("two-equation example: lambda = -m / Omega (1, 1)") {
  // gamma_1 and gamma_3 at psi' = 1, psi'' = 0 from their defining formulas.
  const double alpha = 0.33, s = 0.2, omega = 2.0, beta = 0.99;
  const double psi2 = omega * (s * (alpha - s) + s);
  const double g1 = omega * s / psi2;
  const double g3 = (1.0 + beta * 0.0) * (1.0 - s) / psi2;
  const CapitalConstraintGammas g = capital_constraint_gammas(alpha, s, omega, beta, 1.0, 0.0);
  CHECK(g.g1 == doctest::Approx(g1).epsilon(1e-14));
  CHECK(g.g3 == doctest::Approx(g3).epsilon(1e-14));

  const double c = g1 + (1.0 - alpha) * g3;
  Matrix G(2, 2), F = Matrix::Zero(2, 2);
  G << 1.0, c, 1.0, -1.0;
  F(0, 0) = 1.0;
  for (double gamma : {0.0, 0.3, 0.7}) {
    for (double m : {-1.0, 0.25, 2.0}) {
      // The investment equation carries the distortion with a minus sign.
      Vector mu(2);
      mu << -m, 0.0;
      const LambdaResult r = mu_to_lambda(F, G, gamma * Matrix::Identity(2, 2), mu);
      const double big_omega = 1.0 - gamma + c;
      CHECK(r.lambda(0) == doctest::Approx(-m / big_omega).epsilon(1e-12));
      CHECK(r.lambda(1) == doctest::Approx(-m / big_omega).epsilon(1e-12));
      CHECK(r.residual <= 1e-12);
      CHECK_FALSE(r.used_pinv);
    }
  }
}

TEST_CASE("linearity of the mu to lambda map") {
  Matrix G(2, 2), F(2, 2), Gam(2, 2);
  G << 2.0, 0.3, -0.1, 1.5;
  F << 0.5, 0.1, 0.0, 0.4;
  Gam << 0.5, 0.1, 0.0, 0.3;
  Vector m1(2), m2(2);
  m1 << 1.0, -0.5;
  m2 << 0.2, 0.7;
  const Vector l1 = mu_to_lambda(F, G, Gam, m1).lambda;
  const Vector l2 = mu_to_lambda(F, G, Gam, m2).lambda;
  const Vector l12 = mu_to_lambda(F, G, Gam, 2.0 * m1 - 3.0 * m2).lambda;
  CHECK((l12 - (2.0 * l1 - 3.0 * l2)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("singular map needs the pseudo-inverse flag") {
  const Matrix G = Matrix::Identity(2, 2);
  const Matrix F = Matrix::Identity(2, 2);
  Matrix Gam = Matrix::Identity(2, 2);
  Gam(1, 1) = 0.5;  // F Gamma - G = diag(0, -0.5)
  Vector mu(2);
  mu << 0.0, 1.0;
  try {
    mu_to_lambda(F, G, Gam, mu);
    FAIL("expected SingularMapUnflagged");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularMapUnflagged);
  }
  MuToLambdaOptions opt;
  opt.allow_pinv = true;
  const LambdaResult r = mu_to_lambda(F, G, Gam, mu, opt);
  CHECK(r.used_pinv);
  CHECK(r.lambda(1) == doctest::Approx(2.0));
}

TEST_CASE("friction sign fixtures") {
  const Calibration base;
  CHECK(sign_fixture(EconomyId::LiquidityConstraint, base) == +1);
  CHECK(sign_fixture(EconomyId::AdjustmentCost, base) == -1);
  CHECK(sign_fixture(EconomyId::Irreversibility, base) == -1);
  CHECK(sign_fixture(EconomyId::NonRationalExp, base) == +1);
  Calibration bad;
  bad["omega"] = 0.5;  // outside omega > 1
  CHECK_THROWS_AS(sign_fixture(EconomyId::AdjustmentCost, bad), Error);
}

TEST_CASE("simulated fixtures are reproducible and finite") {
  const Calibration c;
  const FixtureSample a = simulate_adjustment_cost(c, 2000, 5);
  const FixtureSample b = simulate_adjustment_cost(c, 2000, 5);
  CHECK(a.wedge == b.wedge);
  CHECK(a.wedge.allFinite());
  CHECK(a.instrument.allFinite());
  CHECK(simulate_irreversibility(c, 500, 1).wedge.size() == 500);
  CHECK(simulate_non_rational(c, 500, 1).instrument.size() == 500);
  CHECK(simulate_capital_constraint(c, 500, 1).wedge.allFinite());
}

TEST_CASE("default gamma is the pooled AR(1) coefficient") {
  Matrix r(200, 1);
  double v = 1.0;
  for (int t = 0; t < 200; ++t) {
    r(t, 0) = v;
    v *= 0.5;
    v += (t % 2 ? 0.01 : -0.01);
  }
  const Matrix g = default_gamma(r, 2);
  CHECK(g(0, 0) == doctest::Approx(g(1, 1)));
  CHECK(g(0, 1) == 0.0);
  CHECK(std::abs(g(0, 0)) < 0.99);
}
