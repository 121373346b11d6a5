#include "doctest.h"

#include "setid/errors.hpp"
#include "setid/kalman.hpp"

#include <cmath>

using namespace setid;

namespace {

StateSpace ar1_noise(double a, double q, double r) {
  ModelMatrices m;
  m.G = Matrix::Ones(1, 1);
  m.F = Matrix::Zero(1, 1);
  m.H = Matrix::Constant(1, 1, a);
  m.L = Matrix::Ones(1, 1);
  m.R = Matrix::Zero(1, 1);
  m.Sigma = Matrix::Constant(1, 1, q);
  m.C0 = Matrix::Ones(1, 1);
  m.Sigma_v = Matrix::Constant(1, 1, r);
  return assemble_state_space(solve_re(m));
}

}  // namespace

TEST_CASE("log-likelihood equals the joint Gaussian density") {
  const double a = 0.7, q = 0.5, r = 0.3;
  const StateSpace ss = ar1_noise(a, q, r);
  Matrix y(6, 1);
  y << 0.4, -0.2, 1.1, 0.3, -0.8, 0.05;
  FilterOptions opt;
  opt.freeze_after_convergence = false;
  const FilterOutput f = filter(ss, y, std::nullopt, opt);

  // Oracle: y ~ N(0, S) with S_st = q a^|s-t| / (1 - a^2) + r 1(s = t).
  const int T = 6;
  Matrix S(T, T);
  for (int s = 0; s < T; ++s)
    for (int t = 0; t < T; ++t) S(s, t) = q * std::pow(a, std::abs(s - t)) / (1.0 - a * a) + (s == t ? r : 0.0);
  const Eigen::LLT<Matrix> llt(S);
  const Vector sol = llt.solve(y.col(0));
  double logdet = 0.0;
  for (int i = 0; i < T; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const double oracle = -0.5 * (T * std::log(2.0 * M_PI) + logdet + y.col(0).dot(sol));
  CHECK(f.loglik == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("gain converges to the steady state and is then frozen") {
  const StateSpace ss = ar1_noise(0.9, 1.0, 0.5);
  const SimulatedPath p = simulate_state_space(ss, 400, 11);
  const FilterOutput f = filter(ss, p.y);
  REQUIRE(f.converged_at >= 0);
  CHECK((f.steady_gain - ss.K).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("innovations of the true model are white") {
  const StateSpace ss = ar1_noise(0.8, 1.0, 0.2);
  const SimulatedPath p = simulate_state_space(ss, 5000, 4);
  const FilterOutput f = filter(ss, p.y);
  const WhitenessReport w = whiteness_check(f.a, 5, 10);
  CHECK(w.white);
  CHECK(w.bound == doctest::Approx(3.0 / std::sqrt(4990.0)));
}

TEST_CASE("misspecified persistence leaves autocorrelated innovations") {
  const StateSpace truth = ar1_noise(0.95, 1.0, 0.01);
  const SimulatedPath p = simulate_state_space(truth, 5000, 8);
  const FilterOutput f = filter(ar1_noise(0.0, 1.0, 0.01), p.y);
  CHECK_FALSE(whiteness_check(f.a, 5, 10).white);
}

TEST_CASE("filter rejects data of the wrong width") {
  const StateSpace ss = ar1_noise(0.5, 1.0, 0.1);
  try {
    filter(ss, Matrix::Zero(10, 2));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("simulation is deterministic under the seed") {
  const StateSpace ss = ar1_noise(0.5, 1.0, 0.1);
  CHECK(simulate_state_space(ss, 50, 1).y == simulate_state_space(ss, 50, 1).y);
  CHECK(simulate_state_space(ss, 50, 1).y != simulate_state_space(ss, 50, 2).y);
}
