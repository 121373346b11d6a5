#include "setid/moments.hpp"

#include "setid/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <limits>

namespace setid {

Eigen::Matrix<double, 1, Eigen::Dynamic> LagView::lag(int k) const {
  if (k < 1) fail(ErrorCode::InvalidArgument, "instruments may only use lags k >= 1");
  if (k > t_) fail(ErrorCode::InvalidArgument, "lag beyond the start of the sample");
  return data_.row(t_ - k);
}

int InstrumentSet::size(int n_obs) const {
  if (custom) return custom_size;
  const int ncol = columns.empty() ? n_obs : static_cast<int>(columns.size());
  return (constant ? 1 : 0) + lag_depth * ncol;
}

std::vector<std::string> InstrumentSet::labels(const std::vector<std::string>& obs_names) const {
  if (custom) return custom_labels;
  std::vector<std::string> out;
  if (constant) out.push_back("const");
  const int n = static_cast<int>(obs_names.size());
  for (int k = 1; k <= lag_depth; ++k) {
    const int ncol = columns.empty() ? n : static_cast<int>(columns.size());
    for (int c = 0; c < ncol; ++c) {
      const int j = columns.empty() ? c : columns[c];
      std::string base = (j < n ? obs_names[j] : "y" + std::to_string(j)) + "_lag" + std::to_string(k);
      out.push_back(transform == InstrumentTransform::PositivePart ? "pos(" + base + ")" : base);
    }
  }
  return out;
}

Matrix InstrumentSet::build(const Matrix& data) const {
  if (lag_depth < 1 && !custom && lag_depth != 0)
    fail(ErrorCode::InvalidArgument, "lag depth must be >= 0");
  const int n_obs = static_cast<int>(data.cols());
  for (int j : columns)
    if (j < 0 || j >= n_obs) fail(ErrorCode::DimensionMismatch, "instrument column out of range");
  const int nphi = size(n_obs);
  Matrix phi = Matrix::Zero(data.rows(), nphi);
  for (Eigen::Index t = first_row(); t < data.rows(); ++t) {
    LagView view(data, t);
    if (custom) {
      Vector v = custom(view);
      if (v.size() != nphi) fail(ErrorCode::DimensionMismatch, "custom instrument size mismatch");
      phi.row(t) = v.transpose();
      continue;
    }
    int c = 0;
    if (constant) phi(t, c++) = 1.0;
    const int ncol = columns.empty() ? n_obs : static_cast<int>(columns.size());
    for (int k = 1; k <= lag_depth; ++k) {
      const auto row = view.lag(k);
      for (int q = 0; q < ncol; ++q) {
        double v = row(columns.empty() ? q : columns[q]);
        if (transform == InstrumentTransform::PositivePart) v = std::max(v, 0.0);
        phi(t, c++) = v;
      }
    }
  }
  return phi;
}

void SurveySeries::validate(Eigen::Index T) const {
  if (b.size() != T)
    fail(ErrorCode::DimensionMismatch, "survey length " + std::to_string(b.size()) +
                                           " does not match data length " + std::to_string(T));
  for (Eigen::Index t = 0; t < b.size(); ++t)
    if (!(b(t) >= 0.0 && b(t) <= 1.0))
      fail(ErrorCode::SurveyOutOfRange, "survey share at row " + std::to_string(t + 1) + " is " +
                                            std::to_string(b(t)));
}

Vector MomentSystem::violations() const {
  Vector v(n_rows());
  for (int i = 0; i < n_rows(); ++i) {
    const int d = rows[i].direction;
    v(i) = d == 0 ? qbar(i) : std::max(-d * qbar(i), 0.0);
  }
  return v;
}

std::vector<int> MomentSystem::rows_of(RowKind kind) const {
  std::vector<int> out;
  for (int i = 0; i < n_rows(); ++i)
    if (rows[i].kind == kind) out.push_back(i);
  return out;
}

namespace {

void check_filter(const StateSpace& ss, const FilterOutput& filt, const Matrix& data) {
  if (filt.a.rows() != data.rows() || filt.a.cols() != data.cols() || filt.x_pred.rows() != data.rows() ||
      filt.x_pred.cols() != ss.A.rows() || ss.C.rows() != data.cols())
    fail(ErrorCode::DimensionMismatch, "filter output does not match the data and state space");
}

}  // namespace

MomentSystem build_macro_moments(const StateSpace& ss, const FilterOutput& filt, const Matrix& data,
                                 const InstrumentSet& instruments, const std::vector<int>& signs,
                                 const MacroMomentOptions& opt) {
  check_filter(ss, filt, data);
  const int ny = static_cast<int>(data.cols());
  if (static_cast<int>(signs.size()) != ny)
    fail(ErrorCode::DimensionMismatch, "one friction sign per observable required");
  const Matrix phi_all = instruments.build(data);
  const int nphi = static_cast<int>(phi_all.cols());
  MomentSystem ms;
  ms.t0 = instruments.first_row();
  const Eigen::Index T = data.rows() - ms.t0;
  if (T < 2) fail(ErrorCode::InvalidArgument, "not enough observations after the instrument lags");
  const Matrix phi = phi_all.bottomRows(T);
  const Matrix a = filt.a.bottomRows(T);

  ms.per_t.resize(T, ny * nphi);
  for (int j = 0; j < ny; ++j)
    for (int k = 0; k < nphi; ++k) {
      ms.per_t.col(j * nphi + k) = a.col(j).cwiseProduct(phi.col(k));
      MomentRow row;
      row.label = "obs" + std::to_string(j) + "_x_inst" + std::to_string(k);
      row.kind = RowKind::Macro;
      row.observable = j;
      row.instrument = k;
      row.direction = signs[j];
      ms.rows.push_back(row);
    }
  ms.qbar = ms.per_t.colwise().mean().transpose();
  ms.W = Matrix::Identity(ms.n_rows(), ms.n_rows());
  ms.lambda1 = Vector::Constant(ny, std::numeric_limits<double>::quiet_NaN());

  const Matrix m2 = phi.transpose() * phi / static_cast<double>(T);
  const int rank = numerical_rank(m2, opt.rank_tol);
  if (rank < nphi)
    ms.warnings.push_back("InstrumentRankDeficient: instrument second-moment matrix has rank " +
                          std::to_string(rank) + " < " + std::to_string(nphi));
  return ms;
}

void add_survey_moments(MomentSystem& ms, const StateSpace& ss, const FilterOutput& filt,
                        const Matrix& data, const SurveySeries& survey,
                        const InstrumentSet& instruments, const std::vector<int>& signs,
                        const SurveyOptions& opt) {
  check_filter(ss, filt, data);
  survey.validate(data.rows());
  if (instruments.first_row() > ms.t0)
    fail(ErrorCode::InvalidArgument, "survey instruments need more lags than the macro block");
  const Eigen::Index T = data.rows() - ms.t0;
  if (ms.per_t.rows() != T) fail(ErrorCode::DimensionMismatch, "moment system does not match data");
  const Vector b = survey.b.tail(T);
  const bool all_zero = (b.array().abs() <= opt.constant_tol).all();
  const bool all_one = ((b.array() - 1.0).abs() <= opt.constant_tol).all();
  if ((all_zero || all_one) && opt.strict)
    fail(ErrorCode::DegenerateSurvey, "survey '" + survey.question_id + "' is constant at " +
                                          (all_zero ? "0" : "1"));

  const Matrix phi = instruments.build(data).bottomRows(T);
  const Matrix pred = (ss.C * filt.x_pred.bottomRows(T).transpose()).transpose();
  const Matrix a = filt.a.bottomRows(T);
  const int nphi = static_cast<int>(phi.cols());

  for (int j : survey.target_observables) {
    if (j < 0 || j >= static_cast<int>(data.cols()))
      fail(ErrorCode::DimensionMismatch, "survey target observable out of range");
    if (signs[j] == 0) {
      ms.warnings.push_back("survey '" + survey.question_id + "' targets an equality observable; skipped");
      continue;
    }
    if (all_zero) {
      // Nobody is constrained: the frictionless restriction holds exactly.
      for (auto& row : ms.rows)
        if (row.kind == RowKind::Macro && row.observable == j) row.direction = 0;
      ms.warnings.push_back("survey '" + survey.question_id + "' is identically 0: rows for observable " +
                            std::to_string(j) + " become equalities");
      continue;
    }
    if (all_one)
      ms.warnings.push_back("survey '" + survey.question_id + "' is identically 1");

    const Vector w = pred.col(j).cwiseProduct(b);
    const double ww = w.squaredNorm();
    const double lam = ww > 0.0 ? a.col(j).dot(w) / ww : 0.0;
    ms.lambda1(j) = lam;
    const Vector u = a.col(j) - lam * w;
    const Eigen::Index start = ms.per_t.cols();
    ms.per_t.conservativeResize(Eigen::NoChange, start + nphi);
    for (int k = 0; k < nphi; ++k) {
      ms.per_t.col(start + k) = u.cwiseProduct(phi.col(k));
      MomentRow row;
      row.label = "survey_" + survey.question_id + "_obs" + std::to_string(j) + "_x_inst" + std::to_string(k);
      row.kind = RowKind::Survey;
      row.observable = j;
      row.instrument = k;
      row.direction = -signs[j];
      row.supernumerary = true;
      ms.rows.push_back(row);
    }
  }
  ms.qbar = ms.per_t.colwise().mean().transpose();
  ms.W = Matrix::Identity(ms.n_rows(), ms.n_rows());
}

Matrix inverse_variance_weights(const MomentSystem& ms, double floor) {
  const Matrix d = ms.per_t.rowwise() - ms.per_t.colwise().mean();
  Vector var = d.colwise().squaredNorm().transpose() / static_cast<double>(std::max<Eigen::Index>(1, d.rows()));
  Matrix w = Matrix::Zero(ms.n_rows(), ms.n_rows());
  for (int i = 0; i < ms.n_rows(); ++i) w(i, i) = 1.0 / std::max(var(i), floor);
  return w;
}

RefinementReport sargan_refinement_check(const MomentSystem& ms, const std::vector<int>& alpha_rows,
                                         const std::vector<int>& beta_rows, double rel_tol) {
  if (alpha_rows.empty() || beta_rows.empty())
    fail(ErrorCode::InvalidArgument, "refinement check needs both alpha and beta rows");
  const Eigen::Index T = ms.per_t.rows();
  Matrix ma(T, alpha_rows.size());
  Matrix mb(T, beta_rows.size());
  for (std::size_t i = 0; i < alpha_rows.size(); ++i) ma.col(i) = ms.per_t.col(alpha_rows[i]);
  for (std::size_t i = 0; i < beta_rows.size(); ++i) mb.col(i) = ms.per_t.col(beta_rows[i]);
  const int rank = numerical_rank(ma, 1e-10);
  if (rank < ma.cols())
    fail(ErrorCode::AlphaBlockRankDeficient, "alpha block has rank " + std::to_string(rank) + " < " +
                                                 std::to_string(ma.cols()));
  const Matrix coef = ma.colPivHouseholderQr().solve(mb);
  const Matrix u = mb - ma * coef;

  RefinementReport rep;
  const double tt = static_cast<double>(T);
  rep.orthogonal_rms = (u.colwise().squaredNorm().transpose() / tt).cwiseSqrt();
  const Vector base = (mb.colwise().squaredNorm().transpose() / tt).cwiseSqrt();
  rep.relative_rms.resize(base.size());
  for (Eigen::Index i = 0; i < base.size(); ++i)
    rep.relative_rms(i) = base(i) > 0.0 ? rep.orthogonal_rms(i) / base(i) : 0.0;
  rep.orthogonal_mean = u.colwise().mean().transpose();
  rep.refines = (rep.relative_rms.array() > rel_tol).any();
  if (rep.refines) {
    const Matrix d = u.rowwise() - u.colwise().mean();
    const Matrix s = d.transpose() * d / tt;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(s);
    rep.wald = tt * rep.orthogonal_mean.dot(cod.solve(rep.orthogonal_mean));
    const int df = std::max<int>(1, static_cast<int>(cod.rank()));
    boost::math::chi_squared chi(df);
    rep.p_value = boost::math::cdf(boost::math::complement(chi, std::max(rep.wald, 0.0)));
  }
  return rep;
}

RefinementReport sargan_refinement_check(const MomentSystem& ms, double rel_tol) {
  std::vector<int> alpha, beta;
  for (int i = 0; i < ms.n_rows(); ++i) (ms.rows[i].supernumerary ? beta : alpha).push_back(i);
  return sargan_refinement_check(ms, alpha, beta, rel_tol);
}

}  // namespace setid
