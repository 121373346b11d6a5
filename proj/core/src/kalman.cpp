#include "setid/kalman.hpp"

#include "setid/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace setid {

FilterOutput filter(const StateSpace& ss, const Matrix& data, const std::optional<FilterInit>& init,
                    const FilterOptions& opt) {
  const Eigen::Index n = ss.A.rows();
  const Eigen::Index ny = ss.C.rows();
  if (data.cols() != ny)
    fail(ErrorCode::DimensionMismatch, "data has " + std::to_string(data.cols()) +
                                           " columns, model has " + std::to_string(ny) + " observables");
  if (!data.allFinite()) fail(ErrorCode::InvalidArgument, "data contains non-finite values");
  const Eigen::Index T = data.rows();
  const Matrix bqb = symmetrize(ss.B * ss.Sigma_e * ss.B.transpose());

  Vector x = Vector::Zero(n);
  Matrix p;
  if (init) {
    if (init->mean.size() != n || init->cov.rows() != n || init->cov.cols() != n)
      fail(ErrorCode::DimensionMismatch, "filter init does not match the state dimension");
    if (!is_psd(init->cov, 1e-10)) fail(ErrorCode::NonPSDCovariance, "initial covariance is not PSD");
    x = init->mean;
    p = init->cov;
  } else {
    p = solve_discrete_lyapunov(ss.A, bqb);
  }

  FilterOutput out;
  out.x_pred.resize(T, n);
  out.a.resize(T, ny);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  bool frozen = false;
  Matrix k_fixed, s_inv_fixed;
  double logdet_fixed = 0.0;
  Matrix kf_fixed;

  for (Eigen::Index t = 0; t < T; ++t) {
    out.x_pred.row(t) = x.transpose();
    Vector a = data.row(t).transpose() - ss.C * x;
    out.a.row(t) = a.transpose();
    if (opt.keep_covariances) out.pred_cov.push_back(p);

    if (frozen) {
      out.loglik += -0.5 * (static_cast<double>(ny) * log2pi + logdet_fixed + a.dot(s_inv_fixed * a));
      x = ss.A * x + k_fixed * a;
      continue;
    }

    Matrix s = symmetrize(ss.C * p * ss.C.transpose() + ss.Sigma_v);
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success)
      fail(ErrorCode::NonPSDCovariance, "innovation covariance not positive definite at t=" +
                                            std::to_string(t));
    const Matrix s_inv = llt.solve(Matrix::Identity(ny, ny));
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < ny; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    out.loglik += -0.5 * (static_cast<double>(ny) * log2pi + logdet + a.dot(s_inv * a));

    const Matrix kf = p * ss.C.transpose() * s_inv;
    const Matrix k = ss.A * kf;
    const Matrix ikc = Matrix::Identity(n, n) - kf * ss.C;
    // Joseph form keeps the filtered covariance symmetric PSD.
    const Matrix pf = ikc * p * ikc.transpose() + kf * ss.Sigma_v * kf.transpose();
    Matrix next = symmetrize(ss.A * pf * ss.A.transpose() + bqb);
    if (next.diagonal().minCoeff() < -1e-8 * std::max(1.0, next.cwiseAbs().maxCoeff()))
      fail(ErrorCode::NonPSDCovariance, "prediction covariance lost PSD at t=" + std::to_string(t));

    out.gain_path.push_back(k);
    x = ss.A * x + k * a;
    const double delta = inf_norm(next - p);
    p = next;
    if (opt.freeze_after_convergence && delta < opt.tol_converge * std::max(1.0, inf_norm(p))) {
      // The covariance is at its fixed point: the gain and innovation
      // variance no longer change.
      Matrix s2 = symmetrize(ss.C * p * ss.C.transpose() + ss.Sigma_v);
      Eigen::LLT<Matrix> llt2(s2);
      if (llt2.info() != Eigen::Success)
        fail(ErrorCode::NonPSDCovariance, "steady innovation covariance not positive definite");
      s_inv_fixed = llt2.solve(Matrix::Identity(ny, ny));
      logdet_fixed = 0.0;
      for (Eigen::Index i = 0; i < ny; ++i) logdet_fixed += 2.0 * std::log(llt2.matrixL()(i, i));
      k_fixed = ss.A * p * ss.C.transpose() * s_inv_fixed;
      frozen = true;
      out.converged_at = static_cast<int>(t + 1);
      out.gain_path.push_back(k_fixed);
    }
  }
  out.steady_gain = frozen ? k_fixed : (out.gain_path.empty() ? Matrix() : out.gain_path.back());
  return out;
}

WhitenessReport whiteness_check(const Matrix& a, int max_lag, int skip) {
  const Eigen::Index T = a.rows() - skip;
  if (T <= max_lag + 1) fail(ErrorCode::InvalidArgument, "series too short for whiteness check");
  Matrix d = a.bottomRows(T);
  d = d.rowwise() - d.colwise().mean();
  WhitenessReport rep;
  rep.autocorr.resize(max_lag);
  rep.bound = 3.0 / std::sqrt(static_cast<double>(T));
  rep.white = true;
  double worst = 0.0;
  for (int l = 1; l <= max_lag; ++l) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      const double v = d.col(j).squaredNorm();
      const double c = d.col(j).head(T - l).dot(d.col(j).tail(T - l));
      acc += v > 0.0 ? c / v : 0.0;
    }
    rep.autocorr(l - 1) = acc / static_cast<double>(d.cols());
    worst = std::max(worst, std::abs(rep.autocorr(l - 1)));
  }
  rep.white = worst <= rep.bound;
  return rep;
}

SimulatedPath simulate_state_space(const StateSpace& ss, int T, std::uint64_t seed) {
  const Eigen::Index n = ss.A.rows();
  const Eigen::Index nz = ss.B.cols();
  const Eigen::Index ny = ss.C.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto draw = [&](const Matrix& chol, Eigen::Index k) {
    Vector z(k);
    for (Eigen::Index i = 0; i < k; ++i) z(i) = n01(rng);
    return Vector(chol * z);
  };
  auto factor = [](const Matrix& cov) -> Matrix {
    if (cov.size() == 0) return cov;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(cov));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  };
  const Matrix le = factor(ss.Sigma_e);
  const Matrix lv = factor(ss.Sigma_v);
  const Matrix l0 = factor(solve_discrete_lyapunov(ss.A, ss.B * ss.Sigma_e * ss.B.transpose()));
  SimulatedPath out{Matrix(T, n), Matrix(T, ny), Matrix(T, nz)};
  Vector x = draw(l0, n);
  for (int t = 0; t < T; ++t) {
    Vector e = draw(le, nz);
    x = ss.A * x + ss.B * e;
    out.x.row(t) = x.transpose();
    out.e.row(t) = e.transpose();
    Vector y = ss.C * x;
    if (ny > 0 && ss.Sigma_v.cwiseAbs().maxCoeff() > 0.0) y += draw(lv, ny);
    out.y.row(t) = y.transpose();
  }
  return out;
}

}  // namespace setid
