#include "setid/linalg.hpp"

#include "setid/errors.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>

namespace setid {

double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double inf_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q, double tol, int max_iter) {
  if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.cols())
    fail(ErrorCode::DimensionMismatch, "lyapunov: A and Q must be square and conformable");
  Matrix x = q;
  Matrix ak = a;
  for (int it = 0; it < max_iter; ++it) {
    Matrix step = ak * x * ak.transpose();
    x += step;
    ak = ak * ak;
    if (inf_norm(step) <= tol * std::max(1.0, inf_norm(x))) return symmetrize(x);
  }
  fail(ErrorCode::NumericalFailure, "lyapunov: doubling did not converge (A not stable?)");
}

int numerical_rank(const Matrix& a, double rel_tol, Vector* singular_values) {
  if (a.size() == 0) {
    if (singular_values) singular_values->resize(0);
    return 0;
  }
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  if (singular_values) *singular_values = s;
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

double min_eigenvalue_sym(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_psd(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * std::max(1.0, a.cwiseAbs().maxCoeff()))
    return false;
  return min_eigenvalue_sym(a) >= -tol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

namespace {
thread_local double g_qz_margin = 1e-8;

lapack_logical select_stable(const double* ar, const double* ai, const double* b) {
  const double mod = std::hypot(*ar, *ai);
  return mod < (1.0 - g_qz_margin) * std::abs(*b) ? 1 : 0;
}
}  // namespace

OrderedQZ ordered_qz(const Matrix& a, const Matrix& b, double margin) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || b.rows() != n || b.cols() != n)
    fail(ErrorCode::DimensionMismatch, "qz: pencil matrices must be square and equal size");
  OrderedQZ out;
  out.S = a;
  out.T = b;
  out.Q.resize(n, n);
  out.Z.resize(n, n);
  out.alpha_re.resize(n);
  out.alpha_im.resize(n);
  out.beta.resize(n);
  lapack_int sdim = 0;
  g_qz_margin = margin;
  // Eigen matrices are column-major, which matches LAPACK.
  lapack_int info = LAPACKE_dgges(LAPACK_COL_MAJOR, 'V', 'V', 'S', select_stable, n,
                                  out.S.data(), n, out.T.data(), n, &sdim,
                                  out.alpha_re.data(), out.alpha_im.data(), out.beta.data(),
                                  out.Q.data(), n, out.Z.data(), n);
  if (info < 0 || (info > 0 && info <= n))
    fail(ErrorCode::NumericalFailure, "qz: dgges failed with info " + std::to_string(info));
  if (info == n + 1)
    fail(ErrorCode::NumericalFailure, "qz: eigenvalue reordering failed");
  int count = 0;
  for (int i = 0; i < n; ++i)
    if (select_stable(&out.alpha_re[i], &out.alpha_im[i], &out.beta[i])) ++count;
  // info == n + 2 means rounding changed the selection of a pair after
  // reordering; the recount above is the authoritative number.
  out.n_stable = (info == n + 2) ? count : static_cast<int>(sdim);
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) fail(ErrorCode::InvalidArgument, "quantile of empty sample");
  if (sorted.size() == 1) return sorted.front();
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Vector hac_diagonal(const Matrix& series, int bandwidth) {
  const Eigen::Index t = series.rows();
  if (t < 2) fail(ErrorCode::InvalidArgument, "hac: need at least two observations");
  Matrix d = series.rowwise() - series.colwise().mean();
  Vector out = d.colwise().squaredNorm().transpose() / static_cast<double>(t);
  for (int l = 1; l <= bandwidth && l < t; ++l) {
    const double w = 1.0 - static_cast<double>(l) / static_cast<double>(bandwidth + 1);
    Vector g = (d.topRows(t - l).cwiseProduct(d.bottomRows(t - l))).colwise().sum().transpose() /
               static_cast<double>(t);
    out += 2.0 * w * g;
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace setid
