#include "setid/wedge_algebra.hpp"

#include "setid/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace setid {

LambdaResult mu_to_lambda(const Matrix& F, const Matrix& G, const Matrix& Gamma, const Vector& mu_mean,
                          const MuToLambdaOptions& opt) {
  const Eigen::Index n = G.rows();
  if (F.rows() != n || F.cols() != n || G.cols() != n || Gamma.rows() != n || Gamma.cols() != n ||
      mu_mean.size() != n)
    fail(ErrorCode::DimensionMismatch, "mu_to_lambda: F, G, Gamma and mu must share dimension n_x");
  const Matrix c = F * Gamma - G;
  LambdaResult out;
  Eigen::FullPivLU<Matrix> lu(c);
  lu.setThreshold(opt.rank_tol);
  if (lu.rank() == n) {
    out.lambda = lu.solve(-mu_mean);
  } else {
    if (!opt.allow_pinv)
      fail(ErrorCode::SingularMapUnflagged, "F Gamma - G has rank " + std::to_string(lu.rank()) +
                                                " < " + std::to_string(n));
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(c);
    cod.setThreshold(opt.rank_tol);
    out.lambda = cod.solve(-mu_mean);
    out.used_pinv = true;
  }
  out.residual = (c * out.lambda + mu_mean).cwiseAbs().maxCoeff();
  out.sign.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.sign[i] = std::abs(out.lambda(i)) <= 1e-12 ? 0 : (out.lambda(i) > 0 ? 1 : -1);
  return out;
}

LambdaResult mu_to_lambda(const ModelSpec& spec, const ParamVector& theta1, const Matrix& Gamma,
                          const Vector& mu_mean, const MuToLambdaOptions& opt) {
  // The frictionless benchmark sets the friction block to zero.
  Vector th = theta1.values;
  for (int k : theta1.friction_block) th(k) = 0.0;
  const ModelMatrices m = spec.evaluate(th);
  return mu_to_lambda(m.F, m.G, Gamma, mu_mean, opt);
}

WedgeLaw make_wedge_law(const Matrix& F, const Matrix& G, const Matrix& Gamma,
                        const std::vector<int>& sign_mu) {
  if (spectral_radius(Gamma) >= 1.0)
    fail(ErrorCode::InvalidArgument, "wedge persistence Gamma must have spectral radius < 1");
  Vector mu(static_cast<Eigen::Index>(sign_mu.size()));
  for (std::size_t i = 0; i < sign_mu.size(); ++i) mu(static_cast<Eigen::Index>(i)) = sign_mu[i];
  LambdaResult r = mu_to_lambda(F, G, Gamma, mu);
  return WedgeLaw{Gamma, sign_mu, r.sign};
}

Matrix default_gamma(const Matrix& residuals, int n_x) {
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index j = 0; j < residuals.cols(); ++j) {
    for (Eigen::Index t = 1; t < residuals.rows(); ++t) {
      num += residuals(t, j) * residuals(t - 1, j);
      den += residuals(t - 1, j) * residuals(t - 1, j);
    }
  }
  double rho = den > 0.0 ? num / den : 0.0;
  rho = std::clamp(rho, -0.99, 0.99);
  return rho * Matrix::Identity(n_x, n_x);
}

namespace {

double get(const Calibration& c, const std::string& key, double fallback) {
  auto it = c.find(key);
  return it == c.end() ? fallback : it->second;
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::CalibrationOutsideValidRegion, what);
}

struct Defaults {
  double alpha, omega, beta, phi, s_bar, rho, p_high, eps_high, eps_low, eta, psi1, psi2;
};

Defaults read(const Calibration& c) {
  return Defaults{get(c, "alpha", 0.33),   get(c, "omega", 2.0),     get(c, "beta", 0.99),
                  get(c, "phi", 0.5),      get(c, "s_bar", 0.2),     get(c, "rho", 0.5),
                  get(c, "p_high", 0.5),   get(c, "eps_high", 0.1),  get(c, "eps_low", -0.1),
                  get(c, "eta", 0.2),      get(c, "psi1", 1.0),      get(c, "psi2", 0.5)};
}

// Stable root of g1 r^2 - b r + 1 = 0 together with the unstable one.
std::pair<double, double> quadratic_roots(double g1, double b) {
  const double disc = b * b - 4.0 * g1;
  if (disc < 0.0) fail(ErrorCode::CalibrationOutsideValidRegion, "investment polynomial has complex roots");
  const double big = (b + std::sqrt(disc)) / (2.0 * g1);
  return {1.0 / (g1 * big), big};
}

}  // namespace

InvestmentRule investment_roots(double alpha, double s_bar, double omega) {
  const double a = s_bar / alpha;
  const double b = 1.0 + ((1.0 - alpha) * (1.0 - s_bar) + s_bar * omega) / (alpha * omega);
  auto [r1, r2] = quadratic_roots(a, b);
  return InvestmentRule{r1, r2};
}

CapitalConstraintGammas capital_constraint_gammas(double alpha, double s_bar, double omega,
                                                  double beta, double psi1, double psi2) {
  const double curv = psi2 / psi1;
  const double big1 = 1.0 + beta * (psi1 - 1.0);
  const double big2 = omega * (psi1 * s_bar * (alpha - s_bar) + s_bar) - s_bar * (1.0 - s_bar) * curv;
  return CapitalConstraintGammas{(omega * s_bar - curv * s_bar * (1.0 - s_bar)) / big2, omega / big2,
                                 big1 * (1.0 - s_bar) / big2};
}

int sign_fixture(EconomyId economy, const Calibration& calibration) {
  const Defaults d = read(calibration);
  switch (economy) {
    case EconomyId::LiquidityConstraint: {
      const double r = get(calibration, "r", 0.01);
      require(d.beta > 0.0 && d.beta < 1.0, "liquidity constraint needs beta in (0,1)");
      require(r > -1.0, "liquidity constraint needs r > -1");
      require(d.omega > 0.0, "liquidity constraint needs omega > 0");
      return +1;
    }
    case EconomyId::AdjustmentCost:
      require(d.omega > 1.0, "adjustment costs need omega > 1");
      require(d.alpha < 1.0 / (2.0 * d.beta), "adjustment costs need alpha < 1/(2 beta)");
      require(d.phi > 0.0 && d.phi < 1.0, "adjustment costs need phi in (0,1)");
      return -1;
    case EconomyId::Irreversibility:
      require(d.p_high > 0.0 && d.p_high < 1.0, "irreversibility needs P(eps_H) in (0,1)");
      require(d.eps_high > d.eps_low, "irreversibility needs eps_H > eps_L");
      return -1;
    case EconomyId::NonRationalExp:
      require(std::abs(d.rho) < 1.0, "non-rational expectations need |rho| < 1");
      return +1;
  }
  fail(ErrorCode::InvalidArgument, "unknown economy");
}

namespace {

constexpr int kBurn = 1000;

template <class Step>
FixtureSample run_capital_path(int T, std::uint64_t seed, Step step) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  FixtureSample out;
  out.wedge.resize(T);
  out.instrument.resize(T);
  double k = 0.0;
  for (int t = -kBurn; t < T; ++t) {
    const double z = n01(rng);
    auto [lam, k_next] = step(k, z);
    if (t >= 0) {
      out.wedge(t) = lam;
      out.instrument(t) = k;
    }
    k = k_next;
  }
  return out;
}

}  // namespace

FixtureSample simulate_adjustment_cost(const Calibration& c, int T, std::uint64_t seed) {
  sign_fixture(EconomyId::AdjustmentCost, c);
  const Defaults d = read(c);
  auto gammas = [&](double phi) {
    const double den = d.omega + phi * (1.0 + d.beta * (1.0 - d.alpha)) + 1.0 - d.alpha;
    const double g1 = (d.alpha - phi * (1.0 - d.beta * d.alpha)) / den;
    const double g2 = (d.omega + d.beta * phi) / den;
    const double g3 = -d.alpha * (1.0 - d.beta * phi) / den;
    return std::array<double, 3>{g1 / (1.0 - g2), g2, g3};
  };
  const auto g0 = gammas(0.0);
  const auto g = gammas(d.phi);
  const double s = (1.0 - d.s_bar) / d.s_bar;  // C/I
  const double dzeta = g0[0] - g[0];
  const double dg3 = g0[2] - g[2];
  const double a_k = -(s / d.omega) * dzeta * (1.0 - d.alpha);
  const double a_z = (s / d.omega) * (dzeta + dg3);
  const InvestmentRule rule = investment_roots(d.alpha, d.s_bar, d.omega);
  const double q = 1.0 / (rule.rho2 * d.s_bar);
  return run_capital_path(T, seed, [&](double k, double z) {
    const double lam = a_k * k + a_z * z;
    return std::pair{lam, rule.rho1 * k + q * z + lam};
  });
}

FixtureSample simulate_capital_constraint(const Calibration& c, int T, std::uint64_t seed) {
  const Defaults d = read(c);
  require(d.psi1 > 0.0 && d.psi1 <= 1.0, "capital constraint needs psi' in (0,1]");
  const auto g0 = capital_constraint_gammas(d.alpha, d.s_bar, d.omega, d.beta, 1.0, 0.0);
  const auto g = capital_constraint_gammas(d.alpha, d.s_bar, d.omega, d.beta, d.psi1, d.psi2);
  auto [r10, r20] = quadratic_roots(g0.g1, 1.0 + g0.g1 + (1.0 - d.alpha) * g0.g3);
  auto [r1, r2] = quadratic_roots(g.g1, 1.0 + g.g1 + (1.0 - d.alpha) * g.g3);
  const double a_k = r1 - r10;
  const double a_z = 1.0 / (r2 * d.s_bar) - 1.0 / (r20 * d.s_bar);
  const double q0 = 1.0 / (r20 * d.s_bar);
  return run_capital_path(T, seed, [&](double k, double z) {
    const double lam = a_k * k + a_z * z;
    const double inv = r10 * k + q0 * z + lam;
    return std::pair{lam, d.psi1 * inv + (1.0 - d.psi1) * k};
  });
}

FixtureSample simulate_irreversibility(const Calibration& c, int T, std::uint64_t seed) {
  sign_fixture(EconomyId::Irreversibility, c);
  const Defaults d = read(c);
  const InvestmentRule rule = investment_roots(d.alpha, d.s_bar, d.omega);
  const double q = 1.0 / (rule.rho2 * d.s_bar);
  return run_capital_path(T, seed, [&](double k, double z) {
    const double i_star = rule.rho1 * k + q * z;
    const double lam = -(1.0 - d.p_high) * (i_star + k - d.eps_low + d.eps_high);
    return std::pair{lam, i_star + lam};
  });
}

FixtureSample simulate_non_rational(const Calibration& c, int T, std::uint64_t seed) {
  sign_fixture(EconomyId::NonRationalExp, c);
  const Defaults d = read(c);
  require(d.eta > 0.0 && d.eta <= 1.0, "share of boundedly rational agents must be in (0,1]");
  const double s = (1.0 - d.s_bar) / d.s_bar;
  const double a2 = 1.0 + s;
  const double a3 = s * d.alpha / ((1.0 + s) * (d.omega + 1.0 - d.alpha));
  const double scale = a2 / (1.0 - a3 * d.rho);
  const InvestmentRule rule = investment_roots(d.alpha, d.s_bar, d.omega);
  const double k_coef = rule.rho1 + d.eta * scale * d.alpha;
  require(std::abs(k_coef) < 1.0, "capital dynamics explosive for this share of agents");
  return run_capital_path(T, seed, [&](double k, double z) {
    const double lam = d.eta * scale * (d.alpha * k + d.rho * a3 * z);
    return std::pair{lam, rule.rho1 * k + a2 * z + lam};
  });
}

}  // namespace setid
