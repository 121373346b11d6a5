#include "setid/fixtures.hpp"

#include "setid/errors.hpp"

#include <cmath>
#include <random>

namespace setid {

namespace {

// Random matrix whose spectrum lies in an annulus: Schur form Q T Q' with
// prescribed diagonal moduli.
Matrix random_with_spectrum(int n, std::mt19937_64& rng, double lo, double hi) {
  std::normal_distribution<double> nrm;
  std::uniform_real_distribution<double> mod(lo, hi);
  std::bernoulli_distribution flip(0.5);
  Matrix t = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    t(i, i) = (flip(rng) ? -1.0 : 1.0) * mod(rng);
    for (int j = i + 1; j < n; ++j) t(i, j) = 0.3 * nrm(rng);
  }
  Matrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = nrm(rng);
  const Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ();
  return q * t * q.transpose();
}

}  // namespace

RandomModel random_stable_model(int n_x, int n_z, std::uint64_t seed, double stable_max, double unstable_min) {
  if (n_x < 1 || n_z < 1) fail(ErrorCode::InvalidArgument, "dimensions must be positive");
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> nrm;
  RandomModel out;
  out.P0 = random_with_spectrum(n_x, rng, 0.0, stable_max);
  const Matrix U = random_with_spectrum(n_x, rng, unstable_min, 3.0);
  Matrix F(n_x, n_x);
  for (int i = 0; i < n_x; ++i)
    for (int j = 0; j < n_x; ++j) F(i, j) = nrm(rng) + (i == j ? 2.0 : 0.0);
  ModelMatrices& m = out.mats;
  m.F = F;
  m.G = F * (out.P0 + U);
  m.H = m.G * out.P0 - F * out.P0 * out.P0;
  m.L.resize(n_x, n_z);
  for (int i = 0; i < n_x; ++i)
    for (int j = 0; j < n_z; ++j) m.L(i, j) = nrm(rng);
  m.R = random_with_spectrum(n_z, rng, 0.0, 0.9);
  m.Sigma = Matrix::Identity(n_z, n_z);
  m.C0 = Matrix::Identity(n_x, n_x);
  m.Sigma_v = Matrix::Zero(n_x, n_x);
  return out;
}

LiquiditySample simulate_liquidity_economy(const LiquidityEconomy& e, int T, std::uint64_t seed) {
  if (T < 2) fail(ErrorCode::InvalidArgument, "need T >= 2");
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> eps(0.0, e.sigma);
  LiquiditySample s;
  s.c.resize(T);
  s.chi.resize(T);
  double c = 0.0;
  for (int t = -e.burn_in; t < T; ++t) {
    const double chi = c > 0.0 ? 1.0 : 0.0;
    const double shock = eps(rng);
    c = e.mu0 * c + shock + chi * (e.lambda1 * c + e.lambda2 * shock);
    if (t >= 0) {
      s.c(t) = c;
      s.chi(t) = c > 0.0 ? 1.0 : 0.0;
    }
  }
  return s;
}

ModelSpec liquidity_model_spec(double sigma, double lo, double hi) {
  ModelSpec spec;
  spec.n_x = spec.n_z = spec.n_y = 1;
  spec.params.names = {"mu"};
  spec.params.values = Vector::Constant(1, 0.5 * (lo + hi));
  spec.params.bounds = {{lo, hi}};
  spec.friction_signs = {1};
  spec.state_names = {"c"};
  spec.shock_names = {"e"};
  spec.observable_names = {"c"};
  spec.matrix_map = [sigma](const Vector& th) {
    ModelMatrices m;
    m.G = Matrix::Ones(1, 1);
    m.F = Matrix::Zero(1, 1);
    m.H = Matrix::Constant(1, 1, th(0));
    m.L = Matrix::Ones(1, 1);
    m.R = Matrix::Zero(1, 1);
    m.Sigma = Matrix::Constant(1, 1, sigma * sigma);
    return m;
  };
  return spec;
}

double liquidity_upper_endpoint(const Vector& c) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index t = 1; t < c.size(); ++t) {
    const double z = std::max(c(t - 1), 0.0);
    num += c(t) * z;
    den += c(t - 1) * z;
  }
  if (den <= 0.0) fail(ErrorCode::InvalidArgument, "no positive lagged consumption");
  return num / den;
}

EnvelopeFixture make_envelope_fixture(int T, double center, std::uint64_t seed, int grid) {
  if (T < 2 || grid < 2) fail(ErrorCode::InvalidArgument, "need T >= 2 and grid >= 2");
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> nrm;
  Vector x(T), y(T), p(T);
  for (int t = 0; t < T; ++t) {
    x(t) = 1.0 + unif(rng);
    y(t) = 0.5 * x(t) + nrm(rng);
    p(t) = center + nrm(rng);
  }
  EnvelopeFixture f;
  f.p_series = p;
  for (int k = 0; k < grid; ++k) {
    const double theta = 0.2 + 0.6 * k / (grid - 1);
    f.set_series.emplace_back(y - theta * x);
  }
  return f;
}

MeasurementErrorSample simulate_measurement_error(const MeasurementErrorDesign& d, int T, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> nrm;
  MeasurementErrorSample s;
  s.x1.resize(T);
  s.y.resize(T);
  const double sd_eps = std::sqrt(d.var_eps);
  for (int t = 0; t < T; ++t) {
    const double xs = nrm(rng);
    s.x1(t) = xs + d.sd_nu * nrm(rng);
    s.y(t) = d.intercept + xs + sd_eps * nrm(rng);
  }
  return s;
}

namespace {

struct Moments2 {
  double vx, cxy;
};

Moments2 weighted_moments(const MeasurementErrorSample& s, const Vector& w) {
  const double n = w.sum();
  const double mx = w.dot(s.x1) / n;
  const double my = w.dot(s.y) / n;
  const Vector dx = s.x1.array() - mx;
  const Vector dy = s.y.array() - my;
  return {w.dot(dx.cwiseProduct(dx)) / n, w.dot(dx.cwiseProduct(dy)) / n};
}

}  // namespace

double measurement_error_gap(const MeasurementErrorSample& s, double assumed_var, const Vector& counts) {
  const Vector w = counts.size() == 0 ? Vector::Ones(s.x1.size()) : counts;
  const Moments2 m = weighted_moments(s, w);
  if (m.vx <= assumed_var) fail(ErrorCode::InvalidArgument, "assumed error variance exceeds the regressor variance");
  return m.cxy / (m.vx - assumed_var) - m.cxy / m.vx;
}

Vector measurement_error_influence(const MeasurementErrorSample& s, double assumed_var) {
  const Moments2 m = weighted_moments(s, Vector::Ones(s.x1.size()));
  const double dc = 1.0 / (m.vx - assumed_var) - 1.0 / m.vx;
  const double dv = m.cxy * (1.0 / (m.vx * m.vx) - 1.0 / ((m.vx - assumed_var) * (m.vx - assumed_var)));
  const Vector dx = s.x1.array() - s.x1.mean();
  const Vector dy = s.y.array() - s.y.mean();
  return dc * (dx.cwiseProduct(dy).array() - m.cxy).matrix() + dv * (dx.cwiseProduct(dx).array() - m.vx).matrix();
}

}  // namespace setid
