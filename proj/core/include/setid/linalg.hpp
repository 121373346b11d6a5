#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace setid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

double spectral_radius(const Matrix& a);

double inf_norm(const Matrix& a);

// Solves X = A X A' + Q for stable A by Smith doubling.
Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q, double tol = 1e-14,
                               int max_iter = 200);

// Number of singular values above rel_tol * sigma_max.
int numerical_rank(const Matrix& a, double rel_tol, Vector* singular_values = nullptr);

Matrix symmetrize(const Matrix& a);

double min_eigenvalue_sym(const Matrix& a);

bool is_psd(const Matrix& a, double tol = 1e-10);

// Ordered real QZ of the pencil (A, B). Generalized eigenvalues with
// |alpha| < (1 - margin) |beta| are moved to the leading block.
struct OrderedQZ {
  Matrix S, T, Q, Z;
  std::vector<double> alpha_re, alpha_im, beta;
  int n_stable = 0;
};
OrderedQZ ordered_qz(const Matrix& a, const Matrix& b, double margin);

// Sample quantile with linear interpolation between order statistics
// (type 7). `sorted` must be ascending.
double quantile_sorted(const std::vector<double>& sorted, double p);

// Bartlett-kernel long-run variance of each column, bandwidth h (h = 0 is
// the plain variance). Columns are demeaned first.
Vector hac_diagonal(const Matrix& series, int bandwidth);

// SplitMix64 step, used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace setid
