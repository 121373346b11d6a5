#pragma once

#include "setid/linalg.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace setid {

struct WaldDetail {
  double statistic = 0.0;        // distance to the box hull of the cloud
  double cloud_statistic = 0.0;  // distance to the nearest cloud point
  Vector projection;             // clamp of lambda_p onto the box
  Eigen::Index nearest_draw = -1;
};

// T * sum_j (lambda_p_j - clamp_j)^2 / V_jj over the tested coordinates.
// An empty `tested` mask tests every coordinate.
double wald_statistic(const Vector& lambda_p, const Vector& lower, const Vector& upper, const Vector& v_diag,
                      long T, const std::vector<bool>& tested = {});

// cloud: K x n matrix of wedge means, one row per draw of the set.
WaldDetail wald_statistic(const Vector& lambda_p, const Matrix& cloud, const Vector& v_diag, long T,
                          const std::vector<bool>& tested = {});

int default_block_length(long T);

// Counts of each period in a non-overlapping block resample. Blocks start at
// 0, l, 2l, ...; the tail block wraps to the start. Rows sum to T.
Vector block_bootstrap_counts(long T, int block_length, std::uint64_t seed);

struct BootstrapOptions {
  int B = 2000;
  double alpha = 0.05;
  int block_length = 0;  // 0: ceil(T^(1/3))
  std::uint64_t seed = 42;
  int workers = 1;
};

// Seed of replicate b, independent of the worker count.
std::uint64_t replicate_seed(std::uint64_t seed, int b);

// Statistic of one replicate from period counts (length T, summing to T).
using ReplicateStatistic = std::function<double(const Vector& counts)>;

// Sorted replicate statistics. Throws DegenerateBootstrapDistribution when
// every replicate is equal.
std::vector<double> bootstrap_distribution(long T, const ReplicateStatistic& stat, const BootstrapOptions& opt);

struct TestResult {
  double statistic = 0.0;
  double cloud_statistic = 0.0;
  double critical_value = 0.0;
  double alpha = 0.05;
  std::vector<double> bootstrap_draws;  // sorted
  bool reject = false;
  int block_length = 0;
  std::uint64_t seed = 0;
  Vector lambda_p, lower, upper, v_diag;
};

// p_series: T x n wedge path of the complete model. set_series: wedge paths
// (T x n each) of the retained draws of the robust set. The bootstrap
// recenters the complete-model mean at its projection on the estimated box and
// re-estimates the box from the resampled set paths.
TestResult wedge_specification_test(const Matrix& p_series, const std::vector<Matrix>& set_series,
                                    const BootstrapOptions& opt, const std::vector<bool>& tested = {});

// Critical value alone; same conventions as wedge_specification_test.
double bootstrap_critical_value(const Matrix& p_series, const std::vector<Matrix>& set_series,
                                const BootstrapOptions& opt, const std::vector<bool>& tested = {});

}  // namespace setid
