#include "setid/wedge_qp.hpp"

#include "setid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <thread>

namespace setid {

void weight_constraints(const Matrix& q, int p, Matrix& A, Vector& c) {
  const Eigen::Index T = q.rows();
  const Eigen::Index r = q.cols();
  if (p < 0 || p > r) fail(ErrorCode::InvalidArgument, "equality split p out of range");
  A.resize(r + 1, T);
  A.row(0).setOnes();
  A.bottomRows(r) = q.transpose();
  c.resize(r + 1);
  c(0) = static_cast<double>(T);
  for (Eigen::Index j = 0; j < r; ++j) {
    const double s = q.col(j).sum();
    c(j + 1) = j < p ? 0.0 : s - std::max(s, 0.0);
  }
}

namespace {

Vector target_means(const Matrix& q, int p) {
  Vector v = q.colwise().mean().transpose();
  for (Eigen::Index j = p; j < v.size(); ++j) v(j) = std::max(v(j), 0.0);
  return v;
}

void finish(PerturbationWeights& w, const Matrix& A, double tol) {
  const Eigen::Index T = w.M.size();
  w.M_tilde = Vector::Ones(T) - w.M;
  w.objective = 0.5 * (w.M - Vector::Ones(T)).squaredNorm();
  w.binding.assign(T, false);
  for (Eigen::Index t = 0; t < T; ++t) w.binding[t] = w.M(t) <= tol;
  (void)A;
}

// Equality-constrained subproblem on the free set: M_F = 1 + A_F' nu.
bool solve_free(const Matrix& A, const Vector& c, const std::vector<char>& active, Vector& nu, Vector& M) {
  const Eigen::Index T = A.cols();
  const Eigen::Index m = A.rows();
  Matrix h = Matrix::Zero(m, m);
  Vector rhs = c;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (active[t]) continue;
    h.noalias() += A.col(t) * A.col(t).transpose();
    rhs -= A.col(t);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(h);
  cod.setThreshold(1e-13);
  nu = cod.solve(rhs);
  M.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) M(t) = active[t] ? 0.0 : 1.0 + A.col(t).dot(nu);
  // Consistency: the subproblem may be infeasible when h is singular.
  Vector resid = h * nu - rhs;
  return resid.cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff());
}

// Lawson-Hanson nonnegative least squares: min |A x - c| s.t. x >= 0.
Vector nnls(const Matrix& A, const Vector& c, int max_iter) {
  const Eigen::Index n = A.cols();
  Vector x = Vector::Zero(n);
  std::vector<char> passive(n, 0);
  const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()) * static_cast<double>(n);
  for (int outer = 0; outer < max_iter; ++outer) {
    Vector w = A.transpose() * (c - A * x);
    Eigen::Index best = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[j] && w(j) > wmax) {
        wmax = w(j);
        best = j;
      }
    if (best < 0) break;
    passive[best] = 1;
    for (int inner = 0; inner < max_iter; ++inner) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j]) idx.push_back(j);
      Matrix ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
      Vector zp = ap.completeOrthogonalDecomposition().solve(c);
      bool all_pos = true;
      for (Eigen::Index k = 0; k < zp.size(); ++k)
        if (zp(k) <= 0.0) all_pos = false;
      if (all_pos) {
        x.setZero();
        for (std::size_t k = 0; k < idx.size(); ++k) x(idx[k]) = zp(static_cast<Eigen::Index>(k));
        break;
      }
      double alpha = 1.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double z = zp(static_cast<Eigen::Index>(k));
        if (z <= 0.0) alpha = std::min(alpha, x(idx[k]) / (x(idx[k]) - z));
      }
      for (std::size_t k = 0; k < idx.size(); ++k)
        x(idx[k]) += alpha * (zp(static_cast<Eigen::Index>(k)) - x(idx[k]));
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && x(j) <= tol) {
          passive[j] = 0;
          x(j) = 0.0;
        }
    }
  }
  return x;
}

[[noreturn]] void throw_infeasible(const Matrix& A, const Vector& c, int max_iter) {
  const Vector x = nnls(A, c, max_iter);
  const Vector y = c - A * x;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "constraints admit no nonnegative weights; certificate y with max(A'y) = %.3e <= 0 and "
                "c'y = %.3e > 0",
                (A.transpose() * y).maxCoeff(), c.dot(y));
  fail(ErrorCode::QPInfeasible, buf);
}

}  // namespace

PerturbationWeights solve_weights_analytic(const Matrix& q, int p) {
  const Eigen::Index T = q.rows();
  const Eigen::Index r = q.cols();
  if (T < 1) fail(ErrorCode::InvalidArgument, "empty moment matrix");
  if (p < 0 || p > r) fail(ErrorCode::InvalidArgument, "equality split p out of range");
  PerturbationWeights w;
  const Vector qbar = q.colwise().mean().transpose();
  if (r == 0) {
    w.M = Vector::Ones(T);
    w.lambda2.resize(0);
  } else {
    const Matrix qt = q.rowwise() - qbar.transpose();
    const Matrix V = qt.transpose() * q / static_cast<double>(T);
    Eigen::FullPivLU<Matrix> lu(V);
    lu.setThreshold(1e-12);
    if (lu.rank() < r)
      fail(ErrorCode::SingularMomentCovariance, "moment covariance has rank " + std::to_string(lu.rank()) +
                                                    " < " + std::to_string(r));
    const Vector v = target_means(q, p);
    w.lambda2 = -lu.solve(v);
    w.M = Vector::Ones(T) + qt * w.lambda2;
    w.lambda1 = -qbar.dot(w.lambda2);
  }
  w.lambda3 = Vector::Zero(T);
  w.analytic_feasible = w.M.minCoeff() >= 0.0;
  finish(w, Matrix(), 0.0);
  return w;
}

double analytic_block_residual(const Matrix& q, int p, const PerturbationWeights& w) {
  const Eigen::Index T = q.rows();
  const Vector qbar = q.colwise().mean().transpose();
  const Matrix qt = q.rowwise() - qbar.transpose();
  const Vector d = w.M - Vector::Ones(T);
  const Vector b = static_cast<double>(T) * target_means(q, p);
  const double r1 = (d - qt * w.lambda2).cwiseAbs().maxCoeff();
  const double r2 = (q.transpose() * d + b).cwiseAbs().maxCoeff() / static_cast<double>(T);
  return std::max(r1, r2);
}

KKTReport check_kkt(const Matrix& q, int p, const PerturbationWeights& w, double tol) {
  Matrix A;
  Vector c;
  weight_constraints(q, p, A, c);
  const Eigen::Index T = q.rows();
  KKTReport rep;
  rep.primal = (A * w.M - c).cwiseAbs().maxCoeff() / static_cast<double>(T);
  rep.nonneg = std::max(0.0, -w.M.minCoeff());
  std::vector<char> active(T, 0);
  for (Eigen::Index t = 0; t < T; ++t) active[t] = w.M(t) <= tol;
  // Multipliers from the free coordinates by least squares.
  std::vector<Eigen::Index> free;
  for (Eigen::Index t = 0; t < T; ++t)
    if (!active[t]) free.push_back(t);
  Matrix af(A.rows(), static_cast<Eigen::Index>(free.size()));
  Vector rf(static_cast<Eigen::Index>(free.size()));
  for (std::size_t k = 0; k < free.size(); ++k) {
    af.col(static_cast<Eigen::Index>(k)) = A.col(free[k]);
    rf(static_cast<Eigen::Index>(k)) = w.M(free[k]) - 1.0;
  }
  Vector nu = Vector::Zero(A.rows());
  if (!free.empty()) nu = af.transpose().completeOrthogonalDecomposition().solve(rf);
  rep.dual = free.empty() ? 0.0 : (af.transpose() * nu - rf).cwiseAbs().maxCoeff();
  double comp = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const double mu = -(1.0 + A.col(t).dot(nu));
    if (active[t]) {
      rep.dual = std::max(rep.dual, std::max(0.0, -mu));
      comp = std::max(comp, std::abs(mu * w.M(t)));
    }
  }
  rep.complementarity = comp;
  rep.ok = rep.primal <= tol && rep.nonneg <= 1e-10 && rep.dual <= tol && rep.complementarity <= tol;
  return rep;
}

PerturbationWeights solve_weights_qp(const Matrix& q, int p, const QPOptions& opt) {
  const Eigen::Index T = q.rows();
  Matrix A;
  Vector c;
  weight_constraints(q, p, A, c);

  PerturbationWeights analytic;
  bool have_analytic = true;
  try {
    analytic = solve_weights_analytic(q, p);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularMomentCovariance) throw;
    have_analytic = false;
  }
  if (have_analytic && analytic.analytic_feasible) return analytic;

  // Semismooth Newton on the dual: M(nu) = [1 + A' nu]_+, solve A M(nu) = c.
  const Eigen::Index m = A.rows();
  Vector nu = Vector::Zero(m);
  if (have_analytic) {
    nu(0) = analytic.lambda1;
    nu.tail(m - 1) = analytic.lambda2;
  }
  auto dual_value = [&](const Vector& v) {
    const Vector y = (Vector::Ones(T) + A.transpose() * v).cwiseMax(0.0);
    return v.dot(c) - 0.5 * y.squaredNorm() + 0.5 * static_cast<double>(T);
  };
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  std::vector<char> active(T, 0);
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iter && !converged; ++it) {
    const Vector y = Vector::Ones(T) + A.transpose() * nu;
    Matrix h = Matrix::Zero(m, m);
    Vector grad = c;
    for (Eigen::Index t = 0; t < T; ++t) {
      if (y(t) > 0.0) {
        h.noalias() += A.col(t) * A.col(t).transpose();
        grad -= y(t) * A.col(t);
      }
    }
    if (grad.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
      converged = true;
      break;
    }
    h.diagonal().array() += 1e-12 * std::max(1.0, h.trace());
    const Vector step = h.ldlt().solve(grad);
    const double g0 = dual_value(nu);
    double s = 1.0;
    const double slope = grad.dot(step);
    while (s > 1e-12 && dual_value(nu + s * step) < g0 + 1e-4 * s * slope) s *= 0.5;
    if (s <= 1e-12) break;
    nu += s * step;
    if (!std::isfinite(nu.cwiseAbs().maxCoeff()) || nu.cwiseAbs().maxCoeff() > 1e12) break;
  }

  // Exact solve on the identified active set, then single-index corrections
  // (lowest index first) until the KKT conditions hold.
  {
    const Vector y = Vector::Ones(T) + A.transpose() * nu;
    for (Eigen::Index t = 0; t < T; ++t) active[t] = y(t) <= 0.0;
  }
  Vector M;
  for (int polish = 0; polish < opt.max_iter; ++polish, ++it) {
    const bool consistent = solve_free(A, c, active, nu, M);
    Eigen::Index change = -1;
    double worst = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const double viol = active[t] ? 1.0 + A.col(t).dot(nu) : -M(t);
      if (viol > 1e-12 && change < 0) change = t;
      worst = std::max(worst, viol);
    }
    if (consistent && change < 0) {
      PerturbationWeights w;
      w.M = M.cwiseMax(0.0);
      w.lambda1 = nu(0);
      w.lambda2 = nu.tail(m - 1);
      w.lambda3 = Vector::Zero(T);
      for (Eigen::Index t = 0; t < T; ++t)
        if (active[t]) w.lambda3(t) = -(1.0 + A.col(t).dot(nu));
      w.analytic_feasible = false;
      w.from_qp = true;
      w.iterations = it;
      finish(w, A, 0.0);
      const KKTReport rep = check_kkt(q, p, w, opt.tol_kkt);
      if (rep.ok) return w;
      break;
    }
    if (!consistent) {
      if (std::none_of(active.begin(), active.end(), [](char a) { return a; })) break;
      // Release the lowest-index active coordinate.
      for (Eigen::Index t = 0; t < T; ++t)
        if (active[t]) {
          change = t;
          break;
        }
    }
    active[change] = !active[change];
    (void)worst;
  }

  const Vector x = nnls(A, c, 10 * static_cast<int>(T) + 100);
  if ((A * x - c).cwiseAbs().maxCoeff() > 1e-9 * scale) throw_infeasible(A, c, 10 * static_cast<int>(T) + 100);
  fail(ErrorCode::QPNotConverged, "active-set iteration did not reach a KKT point");
}

WedgePaths wedge_paths(const Matrix& residuals, const std::vector<int>& signs, const QPOptions& opt) {
  const Eigen::Index T = residuals.rows();
  const Eigen::Index n = residuals.cols();
  if (static_cast<Eigen::Index>(signs.size()) != n)
    fail(ErrorCode::DimensionMismatch, "one sign per residual column required");
  std::vector<Eigen::Index> eq, ineq;
  for (Eigen::Index j = 0; j < n; ++j) (signs[j] == 0 ? eq : ineq).push_back(j);
  Matrix q(T, n);
  Eigen::Index col = 0;
  for (auto j : eq) q.col(col++) = residuals.col(j);
  for (auto j : ineq) q.col(col++) = signs[j] * residuals.col(j);
  WedgePaths out;
  out.weights = solve_weights_qp(q, static_cast<int>(eq.size()), opt);
  out.lambda = residuals.array().colwise() * out.weights.M_tilde.array();
  out.mean = out.lambda.colwise().mean().transpose();
  out.standardized.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double mu = residuals.col(j).mean();
    const double sd = std::sqrt((residuals.col(j).array() - mu).square().mean());
    out.standardized(j) = sd > 0.0 ? out.mean(j) / sd : 0.0;
  }
  return out;
}

WedgeEnvelope wedges_from_set(const IdentifiedSetDraws& draws, const std::vector<bool>& mask,
                              const ResidualFactory& residuals, const std::vector<int>& signs,
                              int max_draws, int workers, const QPOptions& opt) {
  std::vector<int> members;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) members.push_back(static_cast<int>(i));
  if (members.empty()) fail(ErrorCode::InvalidArgument, "wedge envelope needs a nonempty set");
  std::vector<int> use;
  if (static_cast<int>(members.size()) <= max_draws) {
    use = members;
  } else {
    for (int k = 0; k < max_draws; ++k)
      use.push_back(members[static_cast<std::size_t>(k) * members.size() / static_cast<std::size_t>(max_draws)]);
  }

  std::vector<WedgePaths> paths(use.size());
  std::vector<std::exception_ptr> errors(use.size());
  const int nw = std::max(1, std::min<int>(workers, static_cast<int>(use.size())));
  auto work = [&](int w) {
    for (std::size_t k = static_cast<std::size_t>(w); k < use.size(); k += static_cast<std::size_t>(nw)) {
      try {
        paths[k] = wedge_paths(residuals(draws.draws.row(use[k]).transpose()), signs, opt);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (nw == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const Eigen::Index n = static_cast<Eigen::Index>(signs.size());
  const Eigen::Index T = paths.front().lambda.rows();
  WedgeEnvelope env;
  env.draws_used = use;
  env.lower_mean = Vector::Constant(n, std::numeric_limits<double>::infinity());
  env.upper_mean = Vector::Constant(n, -std::numeric_limits<double>::infinity());
  env.lower_path.resize(T, n);
  env.upper_path.resize(T, n);
  env.median_path.resize(T, n);
  env.theta_lower_index.resize(n);
  env.theta_upper_index.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t k = 0; k < paths.size(); ++k) order.emplace_back(paths[k].mean(j), k);
    std::sort(order.begin(), order.end());
    const auto lo = order.front().second;
    const auto hi = order.back().second;
    const auto med = order[order.size() / 2].second;
    env.lower_mean(j) = order.front().first;
    env.upper_mean(j) = order.back().first;
    env.lower_path.col(j) = paths[lo].lambda.col(j);
    env.upper_path.col(j) = paths[hi].lambda.col(j);
    env.median_path.col(j) = paths[med].lambda.col(j);
    env.theta_lower_index(j) = use[lo];
    env.theta_upper_index(j) = use[hi];
  }
  for (auto& p : paths) env.draw_paths.push_back(std::move(p.lambda));
  return env;
}

}  // namespace setid
