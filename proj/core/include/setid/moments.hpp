#pragma once

#include "setid/kalman.hpp"
#include "setid/model_core.hpp"

#include <functional>
#include <string>
#include <vector>

namespace setid {

// Read-only access to strictly lagged rows of the data: lag(k) is Y_{t-k},
// k >= 1. Instruments only ever see this view.
class LagView {
 public:
  LagView(const Matrix& data, Eigen::Index t) : data_(data), t_(t) {}
  Eigen::Index n_obs() const { return data_.cols(); }
  Eigen::Index available() const { return t_; }
  Eigen::Matrix<double, 1, Eigen::Dynamic> lag(int k) const;

 private:
  const Matrix& data_;
  Eigen::Index t_;
};

enum class InstrumentTransform { Level, PositivePart };

struct InstrumentSet {
  bool constant = true;
  int lag_depth = 1;
  InstrumentTransform transform = InstrumentTransform::Level;
  std::vector<int> columns;  // observables used as lagged instruments; empty = all
  // Optional custom builder; when set it replaces the constant/lag layout.
  std::function<Vector(const LagView&)> custom;
  int custom_size = 0;
  std::vector<std::string> custom_labels;

  int size(int n_obs) const;
  std::vector<std::string> labels(const std::vector<std::string>& obs_names) const;
  // First row with a complete lag history.
  int first_row() const { return lag_depth; }
  // Row t holds phi(Y_{t-1}, ..., Y_{t-lag_depth}); rows before first_row()
  // are zero.
  Matrix build(const Matrix& data) const;
};

struct SurveySeries {
  Vector b;                             // shares in [0, 1], aligned with data rows
  std::string question_id;
  std::vector<int> target_observables;  // observable indices
  void validate(Eigen::Index T) const;
};

enum class RowKind { Macro, Survey };

struct MomentRow {
  std::string label;
  RowKind kind = RowKind::Macro;
  int observable = 0;
  int instrument = 0;
  int direction = 0;  // +1: mean must be >= 0, -1: <= 0, 0: equality
  bool supernumerary = false;
};

struct MomentSystem {
  std::vector<MomentRow> rows;
  Matrix per_t;      // T_eff x r contributions m_t
  Vector qbar;       // column means of per_t
  Matrix W;          // r x r weighting matrix
  int t0 = 0;        // first data row used
  Vector lambda1;    // survey nuisance per targeted observable (NaN when unused)
  std::vector<std::string> warnings;

  int n_rows() const { return static_cast<int>(rows.size()); }
  int n_obs() const { return static_cast<int>(per_t.rows()); }
  // Signed violation per row: equality rows keep their value, inequality
  // rows give max(-direction * qbar, 0).
  Vector violations() const;
  std::vector<int> rows_of(RowKind kind) const;
};

struct MacroMomentOptions {
  double rank_tol = 1e-10;
};

// q_bar = T^-1 sum_t (Y_t - C X_hat_{t|t-1}) kron phi(Y_{t-1}), row index
// observable * n_phi + instrument.
MomentSystem build_macro_moments(const StateSpace& ss, const FilterOutput& filt, const Matrix& data,
                                 const InstrumentSet& instruments, const std::vector<int>& signs,
                                 const MacroMomentOptions& opt = {});

struct SurveyOptions {
  bool strict = false;  // throw DegenerateSurvey for constant b
  double constant_tol = 0.0;
};

// Appends survey-augmented rows (a - lambda1 (C X_hat) b) kron phi with the
// direction opposite to the targeted macro rows. b == 0 turns the targeted
// macro rows into equalities instead.
void add_survey_moments(MomentSystem& ms, const StateSpace& ss, const FilterOutput& filt,
                        const Matrix& data, const SurveySeries& survey,
                        const InstrumentSet& instruments, const std::vector<int>& signs,
                        const SurveyOptions& opt = {});

// Inverse-variance diagonal weights from the per-t contributions.
Matrix inverse_variance_weights(const MomentSystem& ms, double floor = 1e-12);

struct RefinementReport {
  Vector orthogonal_rms;   // per beta row, rms of the projection residual
  Vector relative_rms;     // orthogonal_rms / rms of the beta row
  Vector orthogonal_mean;  // sample mean of the residual
  double wald = 0.0;       // T u_bar' S^-1 u_bar
  double p_value = 1.0;
  bool refines = false;
};

// Projects the beta-block per-t moments on the span of the alpha block and
// reports the size of the orthogonal component.
RefinementReport sargan_refinement_check(const MomentSystem& ms, const std::vector<int>& alpha_rows,
                                         const std::vector<int>& beta_rows, double rel_tol = 1e-8);
RefinementReport sargan_refinement_check(const MomentSystem& ms, double rel_tol = 1e-8);

}  // namespace setid
