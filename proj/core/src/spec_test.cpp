#include "setid/spec_test.hpp"

#include "setid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>

namespace setid {

namespace {

bool is_tested(const std::vector<bool>& tested, Eigen::Index j) {
  return tested.empty() || tested[static_cast<std::size_t>(j)];
}

void check_variance(const Vector& v_diag, Eigen::Index n, const std::vector<bool>& tested) {
  if (v_diag.size() != n) fail(ErrorCode::DimensionMismatch, "variance has wrong length");
  if (!tested.empty() && static_cast<Eigen::Index>(tested.size()) != n)
    fail(ErrorCode::DimensionMismatch, "tested mask has wrong length");
  for (Eigen::Index j = 0; j < n; ++j)
    if (is_tested(tested, j) && !(v_diag(j) > 0.0))
      fail(ErrorCode::SingularVarianceOnTestedCoords,
           "variance of coordinate " + std::to_string(j) + " is not positive");
}

double scaled_distance(const Vector& a, const Vector& b, const Vector& v, long T, const std::vector<bool>& tested) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j)
    if (is_tested(tested, j)) s += (a(j) - b(j)) * (a(j) - b(j)) / v(j);
  return static_cast<double>(T) * s;
}

}  // namespace

double wald_statistic(const Vector& lambda_p, const Vector& lower, const Vector& upper, const Vector& v_diag,
                      long T, const std::vector<bool>& tested) {
  const Eigen::Index n = lambda_p.size();
  if (lower.size() != n || upper.size() != n) fail(ErrorCode::DimensionMismatch, "envelope has wrong length");
  check_variance(v_diag, n, tested);
  const Vector proj = lambda_p.cwiseMax(lower).cwiseMin(upper);
  return scaled_distance(lambda_p, proj, v_diag, T, tested);
}

WaldDetail wald_statistic(const Vector& lambda_p, const Matrix& cloud, const Vector& v_diag, long T,
                          const std::vector<bool>& tested) {
  const Eigen::Index n = lambda_p.size();
  if (cloud.cols() != n || cloud.rows() < 1) fail(ErrorCode::DimensionMismatch, "cloud has wrong shape");
  check_variance(v_diag, n, tested);
  WaldDetail out;
  const Vector lo = cloud.colwise().minCoeff().transpose();
  const Vector hi = cloud.colwise().maxCoeff().transpose();
  out.projection = lambda_p.cwiseMax(lo).cwiseMin(hi);
  out.statistic = scaled_distance(lambda_p, out.projection, v_diag, T, tested);
  out.cloud_statistic = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < cloud.rows(); ++k) {
    const double d = scaled_distance(lambda_p, cloud.row(k).transpose(), v_diag, T, tested);
    if (d < out.cloud_statistic) {
      out.cloud_statistic = d;
      out.nearest_draw = k;
    }
  }
  return out;
}

int default_block_length(long T) {
  return std::max(1, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(T)) - 1e-12)));
}

std::uint64_t replicate_seed(std::uint64_t seed, int b) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(b) + 0x51ed27ULL));
}

Vector block_bootstrap_counts(long T, int block_length, std::uint64_t seed) {
  if (T < 2) fail(ErrorCode::InvalidArgument, "bootstrap needs T >= 2");
  if (block_length < 1 || block_length > std::max<long>(1, T / 2))
    fail(ErrorCode::InvalidArgument, "block length must lie in [1, T/2]");
  const long n_blocks_avail = (T + block_length - 1) / block_length;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long> pick(0, n_blocks_avail - 1);
  Vector counts = Vector::Zero(T);
  long filled = 0;
  while (filled < T) {
    const long start = pick(rng) * block_length;
    for (long i = 0; i < block_length && filled < T; ++i, ++filled) counts((start + i) % T) += 1.0;
  }
  return counts;
}

namespace {

void check_degenerate(const std::vector<double>& sorted) {
  const double lo = sorted.front();
  const double hi = sorted.back();
  if (hi - lo <= 1e-14 * (1.0 + std::abs(hi)))
    fail(ErrorCode::DegenerateBootstrapDistribution,
         "all bootstrap replicates equal " + std::to_string(hi) + "; the tested wedges carry no sampling variation");
}

template <class Work>
void run_parallel(int B, int workers, Work work) {
  const int nw = std::max(1, std::min(workers, B));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nw));
  auto body = [&](int w) {
    try {
      work(w, nw);
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  if (nw == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<double> bootstrap_distribution(long T, const ReplicateStatistic& stat, const BootstrapOptions& opt) {
  if (opt.B < 1) fail(ErrorCode::InvalidArgument, "bootstrap needs B >= 1");
  const int l = opt.block_length > 0 ? opt.block_length : default_block_length(T);
  std::vector<double> out(static_cast<std::size_t>(opt.B));
  run_parallel(opt.B, opt.workers, [&](int w, int nw) {
    for (int b = w; b < opt.B; b += nw)
      out[static_cast<std::size_t>(b)] = stat(block_bootstrap_counts(T, l, replicate_seed(opt.seed, b)));
  });
  std::sort(out.begin(), out.end());
  check_degenerate(out);
  return out;
}

TestResult wedge_specification_test(const Matrix& p_series, const std::vector<Matrix>& set_series,
                                    const BootstrapOptions& opt, const std::vector<bool>& tested) {
  const Eigen::Index T = p_series.rows();
  const Eigen::Index n = p_series.cols();
  const Eigen::Index K = static_cast<Eigen::Index>(set_series.size());
  if (K < 1) fail(ErrorCode::InvalidArgument, "the robust set contributes no wedge paths");
  for (const auto& s : set_series)
    if (s.rows() != T || s.cols() != n) fail(ErrorCode::DimensionMismatch, "set wedge path has wrong shape");
  if (opt.B < 1) fail(ErrorCode::InvalidArgument, "bootstrap needs B >= 1");

  TestResult res;
  res.alpha = opt.alpha;
  res.seed = opt.seed;
  res.block_length = opt.block_length > 0 ? opt.block_length : default_block_length(T);

  // Stack [p | set_1 | ... | set_K] so one product gives all replicate means.
  Matrix stacked(T, n * (K + 1));
  stacked.leftCols(n) = p_series;
  for (Eigen::Index k = 0; k < K; ++k) stacked.middleCols(n * (k + 1), n) = set_series[static_cast<std::size_t>(k)];
  const Vector means = stacked.colwise().mean().transpose();
  res.lambda_p = means.head(n);
  Matrix cloud(K, n);
  for (Eigen::Index k = 0; k < K; ++k) cloud.row(k) = means.segment(n * (k + 1), n).transpose();
  res.lower = cloud.colwise().minCoeff().transpose();
  res.upper = cloud.colwise().maxCoeff().transpose();
  const Vector proj = res.lambda_p.cwiseMax(res.lower).cwiseMin(res.upper);

  // V: long-run variance of the gap between the complete-model path and the
  // set path whose mean is closest on each coordinate.
  Matrix gap(T, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index best = 0;
    (cloud.col(j).array() - proj(j)).abs().minCoeff(&best);
    gap.col(j) = p_series.col(j) - set_series[static_cast<std::size_t>(best)].col(j);
  }
  res.v_diag = hac_diagonal(gap, res.block_length);
  const WaldDetail detail = wald_statistic(res.lambda_p, cloud, res.v_diag, static_cast<long>(T), tested);
  res.statistic = detail.statistic;
  res.cloud_statistic = detail.cloud_statistic;

  constexpr int kChunk = 128;
  const int n_chunks = (opt.B + kChunk - 1) / kChunk;
  std::vector<double> draws(static_cast<std::size_t>(opt.B));
  run_parallel(n_chunks, opt.workers, [&](int w, int nw) {
    for (int chunk = w; chunk < n_chunks; chunk += nw) {
      const int b0 = chunk * kChunk;
      const int nb = std::min(kChunk, opt.B - b0);
      Matrix counts(nb, T);
      for (int i = 0; i < nb; ++i)
        counts.row(i) = block_bootstrap_counts(static_cast<long>(T), res.block_length,
                                               replicate_seed(opt.seed, b0 + i))
                            .transpose();
      const Matrix rep = counts * stacked / static_cast<double>(T);
      for (int i = 0; i < nb; ++i) {
        Vector lo = rep.block(i, n, 1, n).transpose();
        Vector hi = lo;
        for (Eigen::Index k = 1; k < K; ++k) {
          lo = lo.cwiseMin(rep.block(i, n * (k + 1), 1, n).transpose());
          hi = hi.cwiseMax(rep.block(i, n * (k + 1), 1, n).transpose());
        }
        const Vector centered = rep.block(i, 0, 1, n).transpose() - res.lambda_p + proj;
        const Vector clamp = centered.cwiseMax(lo).cwiseMin(hi);
        draws[static_cast<std::size_t>(b0 + i)] = scaled_distance(centered, clamp, res.v_diag, static_cast<long>(T), tested);
      }
    }
  });
  std::sort(draws.begin(), draws.end());
  check_degenerate(draws);
  res.critical_value = quantile_sorted(draws, 1.0 - opt.alpha);
  res.bootstrap_draws = std::move(draws);
  res.reject = res.statistic > res.critical_value;
  return res;
}

double bootstrap_critical_value(const Matrix& p_series, const std::vector<Matrix>& set_series,
                                const BootstrapOptions& opt, const std::vector<bool>& tested) {
  return wedge_specification_test(p_series, set_series, opt, tested).critical_value;
}

}  // namespace setid
