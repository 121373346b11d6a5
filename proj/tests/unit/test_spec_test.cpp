#include "doctest.h"

#include "setid/errors.hpp"
#include "setid/fixtures.hpp"
#include "setid/spec_test.hpp"

#include <random>

using namespace setid;

TEST_CASE("scalar Wald statistic arithmetic") {
  const Vector lp = Vector::Constant(1, -0.05);
  const Vector lo = Vector::Constant(1, -0.4);
  const Vector hi = Vector::Constant(1, -0.1);
  const Vector v = Vector::Constant(1, 0.01);
  CHECK(wald_statistic(lp, lo, hi, v, 100) == doctest::Approx(25.0));
  CHECK(wald_statistic(Vector::Constant(1, -0.2), lo, hi, v, 100) == 0.0);
}

TEST_CASE("box projection equals a grid search") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    Vector lp(2), lo(2), hi(2), v(2);
    for (int j = 0; j < 2; ++j) {
      const double a = u(rng), b = u(rng);
      lo(j) = std::min(a, b);
      hi(j) = std::max(a, b);
      lp(j) = u(rng);
      v(j) = 0.1 + std::abs(u(rng));
    }
    const double tw = wald_statistic(lp, lo, hi, v, 50);
    // Coordinates separate, so search each axis on a fine grid.
    double grid = 0.0;
    for (int j = 0; j < 2; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (int g = 0; g <= 20000; ++g) {
        const double x = lo(j) + (hi(j) - lo(j)) * g / 20000.0;
        best = std::min(best, (lp(j) - x) * (lp(j) - x) / v(j));
      }
      grid += best;
    }
    CHECK(tw == doctest::Approx(50.0 * grid).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("scale equivariance and monotonicity in displacement") {
  Vector lp(2), lo(2), hi(2), v(2);
  lp << 0.8, -1.2;
  lo << -0.5, -0.5;
  hi << 0.5, 0.5;
  v << 0.3, 0.7;
  const double base = wald_statistic(lp, lo, hi, v, 80);
  const double c = 3.7;
  CHECK(wald_statistic(c * lp, c * lo, c * hi, c * c * v, 80) == doctest::Approx(base).epsilon(1e-12));
  Vector dir(2);
  dir << 0.6, -0.8;
  double prev = base;
  for (int k = 1; k <= 20; ++k) {
    const double next = wald_statistic(lp + 0.1 * k * dir, lo, hi, v, 80);
    CHECK(next >= prev - 1e-12);
    prev = next;
  }
}

TEST_CASE("cloud distance is never below the box distance") {
  Matrix cloud(3, 2);
  cloud << 0.0, 0.0, 1.0, 0.5, 0.5, 1.0;
  Vector lp(2);
  lp << 1.5, 1.5;
  const WaldDetail d = wald_statistic(lp, cloud, Vector::Ones(2), 10);
  CHECK(d.statistic == doctest::Approx(10.0 * 0.5));
  CHECK(d.cloud_statistic >= d.statistic);
  CHECK(d.nearest_draw >= 1);
}

TEST_CASE("non-positive variance on a tested coordinate") {
  Vector v(2);
  v << 1.0, 0.0;
  try {
    wald_statistic(Vector::Zero(2), Vector::Zero(2), Vector::Ones(2), v, 10);
    FAIL("expected SingularVarianceOnTestedCoords");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularVarianceOnTestedCoords);
  }
  CHECK(wald_statistic(Vector::Zero(2), Vector::Zero(2), Vector::Ones(2), v, 10, {true, false}) == 0.0);
}

TEST_CASE("block resample counts") {
  CHECK(default_block_length(1000) == 10);
  CHECK(default_block_length(1001) == 11);
  for (int l : {1, 3, 7}) {
    const Vector c = block_bootstrap_counts(50, l, 9);
    CHECK(c.sum() == doctest::Approx(50.0));
    CHECK(c.minCoeff() >= 0.0);
  }
  CHECK(block_bootstrap_counts(50, 3, 9) == block_bootstrap_counts(50, 3, 9));
  CHECK_THROWS_AS(block_bootstrap_counts(50, 30, 9), Error);
}

TEST_CASE("bootstrap distribution is deterministic and worker independent") {
  const Vector x = Vector::LinSpaced(100, -1.0, 1.0);
  const ReplicateStatistic stat = [&](const Vector& w) { return w.dot(x) / 100.0; };
  BootstrapOptions a;
  a.B = 300;
  a.block_length = 1;
  BootstrapOptions b = a;
  b.workers = 3;
  CHECK(bootstrap_distribution(100, stat, a) == bootstrap_distribution(100, stat, b));
  const ReplicateStatistic constant = [](const Vector&) { return 1.0; };
  try {
    bootstrap_distribution(100, constant, a);
    FAIL("expected DegenerateBootstrapDistribution");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateBootstrapDistribution);
  }
}

TEST_CASE("specification test: interior point accepts, far point rejects") {
  BootstrapOptions opt;
  opt.B = 500;
  opt.block_length = 1;
  // Deep inside the envelope no replicate leaves it.
  const EnvelopeFixture deep = make_envelope_fixture(800, 0.0, 3);
  try {
    wedge_specification_test(deep.p_series, deep.set_series, opt);
    FAIL("expected DegenerateBootstrapDistribution");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateBootstrapDistribution);
  }
  const EnvelopeFixture inside = make_envelope_fixture(800, -0.4, 3);
  const TestResult r0 = wedge_specification_test(inside.p_series, inside.set_series, opt);
  CHECK(r0.statistic == 0.0);
  CHECK_FALSE(r0.reject);
  CHECK(r0.lower(0) == doctest::Approx(-0.45).epsilon(0.2));
  CHECK(std::is_sorted(r0.bootstrap_draws.begin(), r0.bootstrap_draws.end()));
  const EnvelopeFixture far = make_envelope_fixture(800, -1.5, 3);
  const TestResult r1 = wedge_specification_test(far.p_series, far.set_series, opt);
  CHECK(r1.reject);
  CHECK(r1.statistic > r1.critical_value);
}

TEST_CASE("measurement-error gap has the sign implied by over-correction") {
  const MeasurementErrorSample s = simulate_measurement_error(MeasurementErrorDesign{}, 5000, 1);
  const double d = measurement_error_gap(s, 0.25);
  // var(X1) = 1.04, so beta_m / beta_ols = 1.04 / 0.79 and d > 0.
  const double beta_ols = 1.0 / 1.04;
  CHECK(d == doctest::Approx(beta_ols * (1.04 / 0.79 - 1.0)).epsilon(0.1));
  const Vector psi = measurement_error_influence(s, 0.25);
  CHECK(std::abs(psi.mean()) <= 1e-10);
}
