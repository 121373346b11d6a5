#include "doctest.h"

#include "setid/errors.hpp"
#include "setid/fixtures.hpp"
#include "setid/model_core.hpp"
#include "setid/wedge_algebra.hpp"

#include <cmath>
#include <random>

using namespace setid;

namespace {

ModelMatrices scalar_model(double g, double f, double h, double l, double r = 0.0) {
  ModelMatrices m;
  m.G = Matrix::Constant(1, 1, g);
  m.F = Matrix::Constant(1, 1, f);
  m.H = Matrix::Constant(1, 1, h);
  m.L = Matrix::Constant(1, 1, l);
  m.R = Matrix::Constant(1, 1, r);
  m.Sigma = Matrix::Identity(1, 1);
  m.C0 = Matrix::Identity(1, 1);
  m.Sigma_v = Matrix::Zero(1, 1);
  return m;
}

ModelSpec ar1_spec() {
  ModelSpec s;
  s.n_x = s.n_z = s.n_y = 1;
  s.params.names = {"rho", "sigma"};
  s.params.values = Vector(2);
  s.params.values << 0.6, 0.8;
  s.params.bounds = {{-0.95, 0.95}, {0.1, 3.0}};
  s.friction_signs = {0};
  s.matrix_map = [](const Vector& th) {
    ModelMatrices m;
    m.G = Matrix::Ones(1, 1);
    m.F = Matrix::Zero(1, 1);
    m.H = Matrix::Constant(1, 1, th(0));
    m.L = Matrix::Ones(1, 1);
    m.Sigma = Matrix::Constant(1, 1, th(1) * th(1));
    m.Sigma_v = Matrix::Constant(1, 1, 0.25);
    return m;
  };
  return s;
}

}  // namespace

TEST_CASE("investment equation roots match the quadratic formula") {
  const double alpha = 0.33, s = 0.2, omega = 2.0;
  const double a = s / alpha;
  const double b = 1.0 + ((1.0 - alpha) * (1.0 - s) + s * omega) / (alpha * omega);
  const double disc = std::sqrt(b * b - 4.0 * a);
  const double stable = (b - disc) / (2.0 * a);
  const double unstable = (b + disc) / (2.0 * a);
  CHECK(stable == doctest::Approx(0.46856).epsilon(1e-4));
  CHECK(unstable == doctest::Approx(3.5211).epsilon(1e-4));

  const Solution sol = solve_re(scalar_model(b, a, 1.0, -1.0 / alpha));
  CHECK(std::abs(sol.P_star(0, 0) - stable) <= 1e-12);
  const InvestmentRule rule = investment_roots(alpha, s, omega);
  CHECK(std::abs(rule.rho1 - stable) <= 1e-12);
  CHECK(std::abs(rule.rho2 - unstable) <= 1e-12 * unstable);
}

TEST_CASE("random models recover the planted stable solvent") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int n = 1 + static_cast<int>(seed % 4);
    const RandomModel rm = random_stable_model(n, 2, seed);
    const Solution sol = solve_re(rm.mats);
    CHECK(sol.residual_P <= 1e-8);
    CHECK(sol.residual_Q <= 1e-8);
    CHECK((sol.P_star - rm.P0).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(spectral_radius(sol.P_star) < 1.0);
  }
}

TEST_CASE("Q solves the shock equation with persistent shocks") {
  const ModelMatrices m = scalar_model(2.5, 0.6, 1.0, -3.0, 0.9);
  const Solution sol = solve_re(m);
  const double p = sol.P_star(0, 0);
  // G Q = F (P Q + Q R) + L
  const double q = -3.0 / (2.5 - 0.6 * p - 0.6 * 0.9);
  CHECK(sol.Q_star(0, 0) == doctest::Approx(q).epsilon(1e-12));
  CHECK(0.6 * p * p - 2.5 * p + 1.0 == doctest::Approx(0.0).scale(1.0));

  // Residual along a simulated path.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nrm;
  Matrix x(200, 1), z(200, 1);
  double xv = 0.0, zv = 0.0;
  for (int t = 0; t < 200; ++t) {
    zv = 0.9 * zv + nrm(rng);
    xv = p * xv + sol.Q_star(0, 0) * zv;
    x(t, 0) = xv;
    z(t, 0) = zv;
  }
  CHECK(law_of_motion_residual(sol, x, z) <= 1e-10);
}

TEST_CASE("solver reports indeterminacy and missing stable solutions") {
  // Roots 0.5 and 0.25: both stable.
  CHECK_THROWS_AS(solve_re(scalar_model(0.75, 1.0, 0.125, 1.0)), Error);
  try {
    solve_re(scalar_model(0.75, 1.0, 0.125, 1.0));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Indeterminate);
  }
  // Roots 2 and 4: no stable root.
  try {
    solve_re(scalar_model(6.0, 1.0, 8.0, 1.0));
    FAIL("expected NoStableSolution");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoStableSolution);
  }
}

TEST_CASE("steady-state gain satisfies the Riccati fixed point") {
  const ModelSpec spec = ar1_spec();
  const Solution sol = solve_re(spec, spec.params);
  const StateSpace ss = assemble_state_space(sol, spec);
  const double a = 0.6, q = 0.64, r = 0.25;
  // Scalar oracle: P = a^2 P r / (P + r) + q.
  const double bq = r - a * a * r - q;
  const double p = (-bq + std::sqrt(bq * bq + 4.0 * q * r)) / 2.0;
  CHECK(ss.P_pred(0, 0) == doctest::Approx(p).epsilon(1e-9));
  CHECK(ss.K(0, 0) == doctest::Approx(a * p / (p + r)).epsilon(1e-9));
  CHECK(ss.Sigma_a(0, 0) == doctest::Approx(p + r).epsilon(1e-9));
}

TEST_CASE("AR(1) with measurement noise is locally identified") {
  const ModelSpec spec = ar1_spec();
  const IdentificationReport rep = check_local_identification(spec, spec.params);
  CHECK(rep.required == 2 + 1);
  CHECK(rep.identified);
}

TEST_CASE("a redundant parameter pair fails the rank condition") {
  ModelSpec spec = ar1_spec();
  spec.params.names = {"a", "b"};
  spec.params.values << 0.3, 2.0;
  spec.params.bounds = {{0.01, 0.45}, {0.5, 3.0}};
  spec.matrix_map = [](const Vector& th) {
    ModelMatrices m;
    m.G = Matrix::Ones(1, 1);
    m.F = Matrix::Zero(1, 1);
    m.H = Matrix::Constant(1, 1, th(0) * th(1));
    m.L = Matrix::Ones(1, 1);
    m.Sigma = Matrix::Ones(1, 1);
    m.Sigma_v = Matrix::Constant(1, 1, 0.25);
    return m;
  };
  const IdentificationReport rep = check_local_identification(spec, spec.params);
  CHECK_FALSE(rep.identified);
  CHECK(rep.rank < rep.required);
}

TEST_CASE("shape errors are reported as DimensionMismatch") {
  ModelMatrices m = scalar_model(1.0, 0.5, 0.2, 1.0);
  m.L = Matrix::Ones(2, 1);
  try {
    solve_re(m);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("parameter vector validation") {
  ParamVector pv;
  pv.names = {"x"};
  pv.values = Vector::Constant(1, 2.0);
  pv.bounds = {{0.0, 1.0}};
  CHECK_FALSE(pv.within_bounds());
  CHECK(pv.index_of("x") == 0);
  CHECK(pv.index_of("y") == -1);
  pv.bounds = {{1.0, 0.0}};
  CHECK_THROWS_AS(pv.validate(), Error);
}
