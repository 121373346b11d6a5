#pragma once

// Brute-force reference for the perturbation-weight program: enumerate every
// set of coordinates pinned at zero, solve the equality-constrained least
// squares on the rest, keep the best nonnegative candidate.

#include "setid/linalg.hpp"

#include <limits>
#include <optional>

namespace setid::oracle {

inline std::optional<Vector> enumerate_weights(const Matrix& q, int p) {
  const Eigen::Index T = q.rows();
  const Eigen::Index r = q.cols();
  Matrix A(r + 1, T);
  A.row(0).setOnes();
  A.bottomRows(r) = q.transpose();
  Vector c(r + 1);
  c(0) = static_cast<double>(T);
  for (Eigen::Index j = 0; j < r; ++j) {
    const double s = q.col(j).sum();
    c(j + 1) = j < p ? 0.0 : std::min(s, 0.0);
  }
  std::optional<Vector> best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << T); ++mask) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index t = 0; t < T; ++t)
      if (!(mask & (1u << t))) free.push_back(t);
    const auto nf = static_cast<Eigen::Index>(free.size());
    if (nf == 0) continue;
    // KKT system [[I, Af'], [Af, 0]] [M; -nu] = [1; c].
    Matrix K = Matrix::Zero(nf + r + 1, nf + r + 1);
    Vector rhs(nf + r + 1);
    K.topLeftCorner(nf, nf).setIdentity();
    for (Eigen::Index k = 0; k < nf; ++k) {
      K.block(k, nf, 1, r + 1) = A.col(free[static_cast<std::size_t>(k)]).transpose();
      K.block(nf, k, r + 1, 1) = A.col(free[static_cast<std::size_t>(k)]);
      rhs(k) = 1.0;
    }
    rhs.tail(r + 1) = c;
    const Vector sol = K.completeOrthogonalDecomposition().solve(rhs);
    if ((K * sol - rhs).cwiseAbs().maxCoeff() > 1e-9) continue;
    Vector M = Vector::Zero(T);
    for (Eigen::Index k = 0; k < nf; ++k) M(free[static_cast<std::size_t>(k)]) = sol(k);
    if (M.minCoeff() < -1e-12) continue;
    if ((A * M - c).cwiseAbs().maxCoeff() > 1e-9) continue;
    const double obj = 0.5 * (M - Vector::Ones(T)).squaredNorm();
    if (obj < best_obj - 1e-14) {
      best_obj = obj;
      best = M.cwiseMax(0.0);
    }
  }
  return best;
}

}  // namespace setid::oracle
