#include "doctest.h"

#include "setid/errors.hpp"
#include "setid/fixtures.hpp"
#include "setid/moments.hpp"

#include <cmath>

using namespace setid;

namespace {

struct Setup {
  Matrix data;
  Vector chi;
  StateSpace ss;
  FilterOutput filt;
};

Setup liquidity_setup(double mu, int T = 2000) {
  Setup s;
  const LiquiditySample sample = simulate_liquidity_economy(LiquidityEconomy{}, T, 9);
  s.data = sample.c;
  s.chi = sample.chi;
  const ModelSpec spec = liquidity_model_spec();
  const Solution sol = solve_re(spec, spec.params.with_values(Vector::Constant(1, mu)));
  s.ss = assemble_state_space(sol, spec);
  s.filt = filter(s.ss, s.data);
  return s;
}

InstrumentSet positive_lag() {
  InstrumentSet inst;
  inst.constant = false;
  inst.lag_depth = 1;
  inst.transform = InstrumentTransform::PositivePart;
  return inst;
}

SurveySeries lagged_constraint(const Vector& chi) {
  SurveySeries s;
  s.b = Vector::Zero(chi.size());
  s.b.tail(chi.size() - 1) = chi.head(chi.size() - 1);
  s.question_id = "constrained";
  s.target_observables = {0};
  return s;
}

}  // namespace

TEST_CASE("violations follow the direction convention") {
  MomentSystem ms;
  ms.rows.resize(3);
  ms.rows[0].direction = +1;
  ms.rows[1].direction = -1;
  ms.rows[2].direction = 0;
  ms.qbar = Vector(3);
  ms.qbar << -1.0, 2.0, 0.5;
  const Vector v = ms.violations();
  CHECK(v(0) == 1.0);
  CHECK(v(1) == 2.0);
  CHECK(v(2) == 0.5);
  ms.qbar << 1.0, -2.0, -0.5;
  const Vector w = ms.violations();
  CHECK(w(0) == 0.0);
  CHECK(w(1) == 0.0);
  CHECK(w(2) == -0.5);
}

TEST_CASE("macro moment equals the innovation times the lagged positive part") {
  const double mu = 0.55;
  const Setup s = liquidity_setup(mu);
  const MomentSystem ms = build_macro_moments(s.ss, s.filt, s.data, positive_lag(), {1});
  REQUIRE(ms.n_rows() == 1);
  double oracle = 0.0;
  const Eigen::Index T = s.data.rows();
  for (Eigen::Index t = 1; t < T; ++t)
    oracle += (s.data(t, 0) - mu * s.data(t - 1, 0)) * std::max(s.data(t - 1, 0), 0.0);
  oracle /= static_cast<double>(T - 1);
  CHECK(ms.qbar(0) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(ms.rows[0].direction == 1);
  CHECK(ms.t0 == 1);
}

TEST_CASE("survey rows use the no-intercept OLS nuisance and the opposite direction") {
  const double mu = 0.6;
  const Setup s = liquidity_setup(mu);
  MomentSystem ms = build_macro_moments(s.ss, s.filt, s.data, positive_lag(), {1});
  InstrumentSet constant;
  constant.lag_depth = 0;
  const SurveySeries sv = lagged_constraint(s.chi);
  add_survey_moments(ms, s.ss, s.filt, s.data, sv, constant, {1});
  REQUIRE(ms.n_rows() == 2);
  CHECK(ms.rows[1].kind == RowKind::Survey);
  CHECK(ms.rows[1].direction == -1);
  CHECK(ms.rows[1].supernumerary);

  double aw = 0.0, ww = 0.0;
  const Eigen::Index T = s.data.rows();
  for (Eigen::Index t = 1; t < T; ++t) {
    const double a = s.data(t, 0) - mu * s.data(t - 1, 0);
    const double w = mu * s.data(t - 1, 0) * sv.b(t);
    aw += a * w;
    ww += w * w;
  }
  const double lam = aw / ww;
  CHECK(ms.lambda1(0) == doctest::Approx(lam).epsilon(1e-10));
  double u = 0.0;
  for (Eigen::Index t = 1; t < T; ++t)
    u += s.data(t, 0) - mu * s.data(t - 1, 0) - lam * mu * s.data(t - 1, 0) * sv.b(t);
  CHECK(ms.qbar(1) == doctest::Approx(u / static_cast<double>(T - 1)).epsilon(1e-9));
}

TEST_CASE("constant surveys: zero gives equalities, strict mode throws") {
  const Setup s = liquidity_setup(0.5, 300);
  InstrumentSet constant;
  constant.lag_depth = 0;
  SurveySeries zero = lagged_constraint(s.chi);
  zero.b.setZero();
  MomentSystem ms = build_macro_moments(s.ss, s.filt, s.data, positive_lag(), {1});
  add_survey_moments(ms, s.ss, s.filt, s.data, zero, constant, {1});
  CHECK(ms.n_rows() == 1);
  CHECK(ms.rows[0].direction == 0);

  SurveyOptions strict;
  strict.strict = true;
  MomentSystem ms2 = build_macro_moments(s.ss, s.filt, s.data, positive_lag(), {1});
  try {
    add_survey_moments(ms2, s.ss, s.filt, s.data, zero, constant, {1}, strict);
    FAIL("expected DegenerateSurvey");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateSurvey);
  }

  SurveySeries one = zero;
  one.b.setOnes();
  MomentSystem ms3 = build_macro_moments(s.ss, s.filt, s.data, positive_lag(), {1});
  add_survey_moments(ms3, s.ss, s.filt, s.data, one, constant, {1});
  CHECK(ms3.n_rows() == 2);
  CHECK_FALSE(ms3.warnings.empty());
}

TEST_CASE("survey shares outside [0, 1] are rejected") {
  SurveySeries s;
  s.b = Vector::Constant(5, 0.5);
  s.b(2) = 1.2;
  try {
    s.validate(5);
    FAIL("expected SurveyOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SurveyOutOfRange);
  }
}

TEST_CASE("instruments see only strictly lagged data") {
  Matrix d(3, 1);
  d << 1.0, 2.0, 3.0;
  const LagView v(d, 2);
  CHECK(v.lag(1)(0) == 2.0);
  CHECK(v.lag(2)(0) == 1.0);
  CHECK_THROWS_AS(v.lag(0), Error);
  CHECK_THROWS_AS(v.lag(3), Error);
}

TEST_CASE("refinement check: informative survey rows versus redundant rows") {
  const Setup s = liquidity_setup(0.6);
  InstrumentSet constant;
  constant.lag_depth = 0;
  MomentSystem ms = build_macro_moments(s.ss, s.filt, s.data, positive_lag(), {1});
  add_survey_moments(ms, s.ss, s.filt, s.data, lagged_constraint(s.chi), constant, {1});
  const RefinementReport informative = sargan_refinement_check(ms);
  CHECK(informative.refines);
  CHECK(informative.relative_rms(0) > 0.1);
  const RefinementReport redundant = sargan_refinement_check(ms, {0}, {0});
  CHECK_FALSE(redundant.refines);
  CHECK(redundant.orthogonal_rms(0) <= 1e-10);
}

TEST_CASE("inverse-variance weights are diagonal and positive") {
  const Setup s = liquidity_setup(0.6, 500);
  const MomentSystem ms = build_macro_moments(s.ss, s.filt, s.data, InstrumentSet{}, {1});
  const Matrix W = inverse_variance_weights(ms);
  CHECK(W.rows() == ms.n_rows());
  for (int i = 0; i < W.rows(); ++i) CHECK(W(i, i) > 0.0);
  CHECK((W - Matrix(W.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
}
