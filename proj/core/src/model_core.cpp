#include "setid/model_core.hpp"

#include "setid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace setid {

bool ParamVector::within_bounds() const {
  for (int i = 0; i < size(); ++i)
    if (!bounds[i].contains(values(i))) return false;
  return true;
}

std::vector<int> ParamVector::structural_block() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (std::find(friction_block.begin(), friction_block.end(), i) == friction_block.end())
      out.push_back(i);
  return out;
}

int ParamVector::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

ParamVector ParamVector::with_values(const Vector& v) const {
  if (v.size() != values.size())
    fail(ErrorCode::DimensionMismatch, "parameter vector has " + std::to_string(v.size()) +
                                           " values, expected " + std::to_string(values.size()));
  ParamVector out = *this;
  out.values = v;
  return out;
}

void ParamVector::validate() const {
  const auto n = static_cast<std::size_t>(size());
  if (bounds.size() != n) fail(ErrorCode::InvalidArgument, "one bound per parameter required");
  if (!names.empty() && names.size() != n)
    fail(ErrorCode::InvalidArgument, "one name per parameter required");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(bounds[i].lo <= bounds[i].hi))
      fail(ErrorCode::InvalidArgument, "empty bound for parameter " + std::to_string(i));
    if (!bounds[i].contains(values(static_cast<Eigen::Index>(i))))
      fail(ErrorCode::InvalidArgument, "parameter " + (names.empty() ? std::to_string(i) : names[i]) +
                                           " outside its bounds");
  }
  std::vector<int> seen;
  for (int k : friction_block) {
    if (k < 0 || k >= size()) fail(ErrorCode::InvalidArgument, "friction index out of range");
    if (std::find(seen.begin(), seen.end(), k) != seen.end())
      fail(ErrorCode::InvalidArgument, "friction index listed twice");
    seen.push_back(k);
  }
}

namespace {

void expect_shape(const Matrix& m, Eigen::Index r, Eigen::Index c, const char* name) {
  if (m.rows() != r || m.cols() != c)
    fail(ErrorCode::DimensionMismatch, std::string(name) + " is " + std::to_string(m.rows()) + "x" +
                                           std::to_string(m.cols()) + ", expected " +
                                           std::to_string(r) + "x" + std::to_string(c));
}

void expect_finite(const Matrix& m, const char* name) {
  if (!m.allFinite()) fail(ErrorCode::NumericalFailure, std::string(name) + " has non-finite entries");
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix pinv_sym(const Matrix& s) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(s);
  return cod.pseudoInverse();
}

}  // namespace

ModelMatrices ModelSpec::evaluate(const Vector& theta) const {
  if (!matrix_map) fail(ErrorCode::InvalidArgument, "model has no matrix map");
  ModelMatrices m = matrix_map(theta);
  if (m.H.size() == 0) m.H = Matrix::Zero(n_x, n_x);
  if (m.R.size() == 0) m.R = Matrix::Zero(n_z, n_z);
  if (m.C0.size() == 0) {
    if (n_y != n_x) fail(ErrorCode::DimensionMismatch, "observation selector required when n_y != n_x");
    m.C0 = Matrix::Identity(n_x, n_x);
  }
  if (m.Sigma_v.size() == 0) m.Sigma_v = Matrix::Zero(n_y, n_y);
  expect_shape(m.G, n_x, n_x, "G");
  expect_shape(m.F, n_x, n_x, "F");
  expect_shape(m.H, n_x, n_x, "H");
  expect_shape(m.L, n_x, n_z, "L");
  expect_shape(m.R, n_z, n_z, "R");
  expect_shape(m.Sigma, n_z, n_z, "Sigma");
  expect_shape(m.C0, n_y, n_x, "C");
  expect_shape(m.Sigma_v, n_y, n_y, "Sigma_v");
  return m;
}

void ModelSpec::validate(int samples, unsigned seed) const {
  if (n_x <= 0 || n_z <= 0 || n_y <= 0)
    fail(ErrorCode::DimensionMismatch, "n_x, n_z and n_y must be positive");
  params.validate();
  if (static_cast<int>(friction_signs.size()) != n_y)
    fail(ErrorCode::DimensionMismatch, "one friction sign per observable required");
  for (int s : friction_signs)
    if (s < -1 || s > 1) fail(ErrorCode::InvalidArgument, "friction signs must be -1, 0 or +1");
  std::mt19937_64 rng(seed);
  for (int k = 0; k <= samples; ++k) {
    Vector th = params.values;
    if (k > 0) {
      for (int i = 0; i < params.size(); ++i) {
        std::uniform_real_distribution<double> u(params.bounds[i].lo, params.bounds[i].hi);
        th(i) = u(rng);
      }
    }
    ModelMatrices m = evaluate(th);
    if (!is_psd(m.Sigma, 1e-10)) fail(ErrorCode::InvalidArgument, "Sigma is not symmetric PSD");
    if (!is_psd(m.Sigma_v, 1e-10)) fail(ErrorCode::InvalidArgument, "Sigma_v is not symmetric PSD");
    if (spectral_radius(m.R) >= 1.0)
      fail(ErrorCode::InvalidArgument, "R has spectral radius >= 1 inside the bounds");
  }
}

Solution solve_re(const ModelMatrices& m, const SolveOptions& opt) {
  const Eigen::Index n = m.G.rows();
  const Eigen::Index nz = m.L.cols();
  expect_shape(m.G, n, n, "G");
  expect_shape(m.F, n, n, "F");
  expect_shape(m.H, n, n, "H");
  expect_shape(m.R, nz, nz, "R");
  expect_shape(m.L, n, nz, "L");
  for (auto [mat, name] : {std::pair{&m.G, "G"}, {&m.F, "F"}, {&m.H, "H"}, {&m.L, "L"}, {&m.R, "R"}})
    expect_finite(*mat, name);

  // Companion pencil for F P^2 - G P + H = 0 on s = (y, x) with y = lambda x:
  // [G -H; I 0] v = lambda [F 0; 0 I] v.
  Matrix a = Matrix::Zero(2 * n, 2 * n);
  Matrix b = Matrix::Zero(2 * n, 2 * n);
  a.topLeftCorner(n, n) = m.G;
  a.topRightCorner(n, n) = -m.H;
  a.bottomLeftCorner(n, n) = Matrix::Identity(n, n);
  b.topLeftCorner(n, n) = m.F;
  b.bottomRightCorner(n, n) = Matrix::Identity(n, n);

  OrderedQZ qz = ordered_qz(a, b, opt.unit_margin);
  if (qz.n_stable > n)
    fail(ErrorCode::Indeterminate, std::to_string(qz.n_stable) + " stable roots for " +
                                       std::to_string(n) + " states");
  if (qz.n_stable < n)
    fail(ErrorCode::NoStableSolution, "only " + std::to_string(qz.n_stable) + " stable roots for " +
                                          std::to_string(n) + " states");

  Matrix z11 = qz.Z.topLeftCorner(n, n);
  Matrix z21 = qz.Z.bottomLeftCorner(n, n);
  Eigen::JacobiSVD<Matrix> svd(z21);
  const Vector& sv = svd.singularValues();
  const double cond = sv(n - 1) > 0.0 ? sv(0) / sv(n - 1) : INFINITY;
  if (!(cond <= opt.cond_max))
    fail(ErrorCode::NumericalFailure, "stable subspace basis is ill-conditioned (cond " +
                                          std::to_string(cond) + ")");

  Solution sol;
  sol.mats = m;
  sol.P_star = z21.transpose().fullPivLu().solve(z11.transpose()).transpose();
  sol.residual_P = inf_norm(m.F * sol.P_star * sol.P_star - m.G * sol.P_star + m.H);
  if (!(sol.residual_P <= opt.tol_solve))
    fail(ErrorCode::NumericalFailure, "matrix quadratic residual " + std::to_string(sol.residual_P));

  // (F P - G) Q + F Q R + L = 0, vectorized column-major.
  const Matrix fpg = m.F * sol.P_star - m.G;
  Matrix sys = kron(m.R.transpose(), m.F) + kron(Matrix::Identity(nz, nz), fpg);
  Eigen::FullPivLU<Matrix> lu(sys);
  if (!lu.isInvertible())
    fail(ErrorCode::NumericalFailure, "shock-loading equation is singular");
  Vector vecl = Eigen::Map<const Vector>(m.L.data(), m.L.size());
  Vector vecq = lu.solve(-vecl);
  sol.Q_star = Eigen::Map<Matrix>(vecq.data(), n, nz);
  sol.residual_Q = inf_norm(fpg * sol.Q_star + m.F * sol.Q_star * m.R + m.L);
  if (!(sol.residual_Q <= opt.tol_solve))
    fail(ErrorCode::NumericalFailure, "shock-loading residual " + std::to_string(sol.residual_Q));
  return sol;
}

Solution solve_re(const ModelSpec& spec, const ParamVector& theta, const SolveOptions& opt) {
  if (!theta.within_bounds()) fail(ErrorCode::InvalidArgument, "theta outside its bounds");
  Solution sol = solve_re(spec.evaluate(theta.values), opt);
  sol.theta = theta;
  return sol;
}

double law_of_motion_residual(const Solution& sol, const Matrix& x_path, const Matrix& z_path) {
  const auto& m = sol.mats;
  double worst = 0.0;
  for (Eigen::Index t = 1; t < x_path.rows(); ++t) {
    Vector x = x_path.row(t).transpose();
    Vector xl = x_path.row(t - 1).transpose();
    Vector z = z_path.row(t).transpose();
    Vector r = m.G * x - m.F * (sol.P_star * x + sol.Q_star * (m.R * z)) - m.H * xl - m.L * z;
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

void steady_state_gain(StateSpace& ss, const RiccatiOptions& opt) {
  const Matrix bqb = symmetrize(ss.B * ss.Sigma_e * ss.B.transpose());
  Matrix p = solve_discrete_lyapunov(ss.A, bqb);
  for (int it = 1; it <= opt.max_iters; ++it) {
    Matrix s = symmetrize(ss.C * p * ss.C.transpose() + ss.Sigma_v);
    Matrix kf = p * ss.C.transpose() * pinv_sym(s);
    Matrix ikc = Matrix::Identity(p.rows(), p.rows()) - kf * ss.C;
    Matrix pf = ikc * p * ikc.transpose() + kf * ss.Sigma_v * kf.transpose();
    Matrix next = symmetrize(ss.A * pf * ss.A.transpose() + bqb);
    const double delta = inf_norm(next - p);
    p = next;
    if (delta < opt.tol * std::max(1.0, inf_norm(p))) {
      ss.P_pred = p;
      ss.Sigma_a = symmetrize(ss.C * p * ss.C.transpose() + ss.Sigma_v);
      ss.K = ss.A * p * ss.C.transpose() * pinv_sym(ss.Sigma_a);
      ss.riccati_iterations = it;
      return;
    }
  }
  fail(ErrorCode::RiccatiDivergence,
       "no fixed point after " + std::to_string(opt.max_iters) + " iterations");
}

StateSpace assemble_state_space(const Solution& sol, const RiccatiOptions& opt) {
  const auto& m = sol.mats;
  const Eigen::Index n = sol.P_star.rows();
  const Eigen::Index nz = sol.Q_star.cols();
  StateSpace ss;
  ss.Sigma_e = m.Sigma;
  ss.Sigma_v = m.Sigma_v.size() ? m.Sigma_v : Matrix::Zero(m.C0.rows(), m.C0.rows());
  const bool iid = m.R.size() == 0 || m.R.cwiseAbs().maxCoeff() == 0.0;
  if (iid) {
    ss.A = sol.P_star;
    ss.B = sol.Q_star;
    ss.C = m.C0;
  } else {
    ss.augmented = true;
    ss.A = Matrix::Zero(n + nz, n + nz);
    ss.A.topLeftCorner(n, n) = sol.P_star;
    ss.A.topRightCorner(n, nz) = sol.Q_star * m.R;
    ss.A.bottomRightCorner(nz, nz) = m.R;
    ss.B.resize(n + nz, nz);
    ss.B.topRows(n) = sol.Q_star;
    ss.B.bottomRows(nz) = Matrix::Identity(nz, nz);
    ss.C = Matrix::Zero(m.C0.rows(), n + nz);
    ss.C.leftCols(n) = m.C0;
  }
  if (spectral_radius(ss.A) >= 1.0)
    fail(ErrorCode::NumericalFailure, "state transition is not stable");
  const Matrix d = ss.C * ss.B;
  ss.lci3_nonsingular = numerical_rank(d * ss.Sigma_e * d.transpose(), 1e-10) == d.rows();
  steady_state_gain(ss, opt);
  return ss;
}

StateSpace assemble_state_space(const Solution& sol, const ModelSpec& spec,
                                const RiccatiOptions& opt) {
  if (sol.mats.C0.rows() != spec.n_y)
    fail(ErrorCode::DimensionMismatch, "solution does not match the model's observables");
  return assemble_state_space(sol, opt);
}

Vector reduced_form_vector(const StateSpace& ss) {
  const Eigen::Index n = ss.A.rows();
  const Eigen::Index ny = ss.C.rows();
  Vector out(n * n + n * ny + ny * n + ny * (ny + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) out(k++) = ss.A(i, j);
  for (Eigen::Index j = 0; j < ny; ++j)
    for (Eigen::Index i = 0; i < n; ++i) out(k++) = ss.K(i, j);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < ny; ++i) out(k++) = ss.C(i, j);
  for (Eigen::Index j = 0; j < ny; ++j)
    for (Eigen::Index i = j; i < ny; ++i) out(k++) = ss.Sigma_a(i, j);
  return out;
}

namespace {

StateSpace state_space_at(const ModelSpec& spec, const Vector& theta, const IdentificationOptions& opt) {
  Solution sol = solve_re(spec.evaluate(theta), opt.solve);
  return assemble_state_space(sol, opt.riccati);
}

}  // namespace

IdentificationReport check_local_identification(const ModelSpec& spec, const ParamVector& theta,
                                                const IdentificationOptions& opt) {
  const StateSpace base = state_space_at(spec, theta.values, opt);
  const Vector d0 = reduced_form_vector(base);
  const int nth = theta.size();
  const Eigen::Index n = base.A.rows();

  IdentificationReport rep;
  rep.jacobian.resize(d0.size(), nth + n * n);
  for (int i = 0; i < nth; ++i) {
    const double eps = opt.eps_scale * (1.0 + std::abs(theta.values(i)));
    Vector up = theta.values;
    Vector dn = theta.values;
    up(i) += eps;
    dn(i) -= eps;
    if (!theta.bounds.empty()) {
      if (up(i) > theta.bounds[i].hi) up(i) = theta.values(i);
      if (dn(i) < theta.bounds[i].lo) dn(i) = theta.values(i);
    }
    Vector dup, ddn;
    try {
      dup = up(i) == theta.values(i) ? d0 : reduced_form_vector(state_space_at(spec, up, opt));
      ddn = dn(i) == theta.values(i) ? d0 : reduced_form_vector(state_space_at(spec, dn, opt));
    } catch (const Error& e) {
      fail(ErrorCode::SolveFailedAtPerturbation,
           "parameter " + std::to_string(i) + ": " + e.what());
    }
    rep.jacobian.col(i) = (dup - ddn) / (up(i) - dn(i));
  }

  // Columns for T = I + E, E = e_i e_j'. Sigma_a is invariant.
  const Eigen::Index ny = base.C.rows();
  int col = nth;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Matrix e = Matrix::Zero(n, n);
      e(i, j) = 1.0;
      StateSpace d;
      d.A = e * base.A - base.A * e;
      d.K = e * base.K;
      d.C = -base.C * e;
      d.Sigma_a = Matrix::Zero(ny, ny);
      rep.jacobian.col(col++) = reduced_form_vector(d);
    }
  }

  rep.required = nth + static_cast<int>(n * n);
  rep.rank = numerical_rank(rep.jacobian, opt.rank_tol, &rep.singular_values);
  rep.identified = rep.rank == rep.required;

  Matrix ctrb(n, n * base.B.cols());
  Matrix obsv(n * ny, n);
  Matrix ak = Matrix::Identity(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.block(0, k * base.B.cols(), n, base.B.cols()) = ak * base.B;
    obsv.block(k * ny, 0, ny, n) = base.C * ak;
    ak = ak * base.A;
  }
  rep.controllable = numerical_rank(ctrb, 1e-10) == n;
  rep.observable = numerical_rank(obsv, 1e-10) == n;
  return rep;
}

}  // namespace setid
