#pragma once

#include "setid/model_core.hpp"

#include <optional>
#include <vector>

namespace setid {

struct FilterInit {
  Vector mean;
  Matrix cov;
};

struct FilterOptions {
  double tol_converge = 1e-10;
  bool keep_covariances = false;
  bool freeze_after_convergence = true;
};

struct FilterOutput {
  Matrix x_pred;                 // row t = X_hat_{t|t-1}
  Matrix a;                      // row t = Y_t - C X_hat_{t|t-1}
  std::vector<Matrix> gain_path; // K_t for t < converged_at, then the frozen gain
  Matrix steady_gain;
  int converged_at = -1;         // first t whose gain was frozen, -1 if never
  double loglik = 0.0;
  std::vector<Matrix> pred_cov;  // filled when keep_covariances
};

// Innovation-form Kalman filter: X_hat_{t+1|t} = A X_hat_{t|t-1} + K_t a_t.
// Default init: zero mean and the stationary covariance.
FilterOutput filter(const StateSpace& ss, const Matrix& data,
                    const std::optional<FilterInit>& init = std::nullopt,
                    const FilterOptions& opt = {});

struct WhitenessReport {
  Vector autocorr;  // lags 1..max_lag, pooled over observables
  double bound = 0.0;  // 3 / sqrt(T)
  bool white = false;
};

WhitenessReport whiteness_check(const Matrix& a, int max_lag = 5, int skip = 0);

// Draws (X_t, Y_t) from the state-space form, X_0 from the stationary law.
struct SimulatedPath {
  Matrix x;  // T x n_state
  Matrix y;  // T x n_obs
  Matrix e;  // T x n_shock
};
SimulatedPath simulate_state_space(const StateSpace& ss, int T, std::uint64_t seed);

}  // namespace setid
