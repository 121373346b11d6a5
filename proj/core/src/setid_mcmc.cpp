#include "setid/setid_mcmc.hpp"

#include "setid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <random>
#include <thread>

namespace setid {

Criterion eval_criterion(const MomentSystem& ms, double tol_crit) {
  Criterion c;
  c.q_plus = ms.violations();
  c.W = ms.W;
  if (c.W.rows() != c.q_plus.size()) fail(ErrorCode::DimensionMismatch, "weighting matrix size mismatch");
  const double n = static_cast<double>(ms.n_obs());
  c.value = n * c.q_plus.dot(c.W * c.q_plus);
  if (!std::isfinite(c.value)) c.value = std::numeric_limits<double>::infinity();
  c.value = std::max(c.value, 0.0);
  c.zero = c.value <= tol_crit;
  return c;
}

CriterionFn criterion_from_factory(MomentFactory factory) {
  return [factory = std::move(factory)](const Vector& theta) {
    try {
      return eval_criterion(factory(theta)).value;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
}

namespace {

struct ChainResult {
  Matrix draws;
  Vector crit;
  double acceptance = 0.0;
  Vector scales;
  std::vector<std::string> warnings;
};

struct BlockState {
  std::vector<int> idx;
  Matrix chol;
  double scale = 1.0;
  long window_tries = 0;
  long window_accepts = 0;
};

bool inside(const Vector& th, const std::vector<Interval>& bounds) {
  for (Eigen::Index i = 0; i < th.size(); ++i)
    if (!bounds[i].contains(th(i))) return false;
  return true;
}

ChainResult run_chain(const CriterionFn& crit, const ParamVector& prior, const McmcConfig& cfg,
                      const std::vector<std::vector<int>>& blocks, int chain) {
  std::mt19937_64 rng(splitmix64(cfg.seed + 0x1000193ULL * static_cast<std::uint64_t>(chain + 1)));
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int d = prior.size();
  const auto& bounds = prior.bounds;

  Vector theta(d);
  double cur = std::numeric_limits<double>::infinity();
  if (cfg.initial.size() == d) {
    theta = cfg.initial;
    if (!inside(theta, bounds)) fail(ErrorCode::InvalidArgument, "initial point outside the bounds");
    cur = crit(theta);
    if (!std::isfinite(cur)) fail(ErrorCode::NonFiniteCriterion, "criterion is not finite at the initial point");
  } else {
    for (int i = 0; i < d; ++i) theta(i) = 0.5 * (bounds[i].lo + bounds[i].hi);
    cur = crit(theta);
    for (int attempt = 0; attempt < 1000 && !std::isfinite(cur); ++attempt) {
      for (int i = 0; i < d; ++i) theta(i) = bounds[i].lo + u01(rng) * bounds[i].width();
      cur = crit(theta);
    }
    if (!std::isfinite(cur)) fail(ErrorCode::NonFiniteCriterion, "no finite starting point found in 1000 prior draws");
  }

  std::vector<BlockState> st(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    st[b].idx = blocks[b];
    const auto k = static_cast<Eigen::Index>(blocks[b].size());
    st[b].chol = Matrix::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) st[b].chol(i, i) = 0.1 * bounds[blocks[b][i]].width();
  }

  const long per_chain_keep =
      std::min<long>(cfg.steps - cfg.burn_in, (cfg.retained + cfg.chains - 1) / cfg.chains);
  const long first_kept = cfg.steps - per_chain_keep;
  ChainResult out;
  out.draws.resize(per_chain_keep, d);
  out.crit.resize(per_chain_keep);
  std::vector<Vector> history;
  long tries = 0, accepts = 0;
  Vector prop(d);

  for (long s = 0; s < cfg.steps; ++s) {
    for (auto& b : st) {
      prop = theta;
      const auto k = static_cast<Eigen::Index>(b.idx.size());
      Vector z(k);
      for (Eigen::Index i = 0; i < k; ++i) z(i) = n01(rng);
      const Vector step = b.scale * (b.chol * z);
      for (Eigen::Index i = 0; i < k; ++i) prop(b.idx[i]) += step(i);
      bool ok = false;
      double val = std::numeric_limits<double>::infinity();
      if (inside(prop, bounds)) {
        val = crit(prop);
        ok = std::isfinite(val) && std::log(u01(rng)) < cur - val;
      }
      if (ok) {
        theta = prop;
        cur = val;
      }
      ++b.window_tries;
      b.window_accepts += ok ? 1 : 0;
      if (s >= cfg.burn_in) {
        ++tries;
        accepts += ok ? 1 : 0;
      }
    }

    if (s < cfg.burn_in) {
      history.push_back(theta);
      if ((s + 1) % cfg.adapt_every == 0) {
        for (auto& b : st) {
          const double rate = static_cast<double>(b.window_accepts) / static_cast<double>(b.window_tries);
          b.scale *= std::exp(rate - cfg.target_accept);
          b.scale = std::clamp(b.scale, 1e-4, 1e4);
          b.window_tries = 0;
          b.window_accepts = 0;
          // Proposal shape from the burn-in history once it is long enough.
          if (history.size() >= static_cast<std::size_t>(4 * cfg.adapt_every)) {
            const auto k = static_cast<Eigen::Index>(b.idx.size());
            const std::size_t from = history.size() / 2;
            Matrix h(static_cast<Eigen::Index>(history.size() - from), k);
            for (std::size_t r = from; r < history.size(); ++r)
              for (Eigen::Index i = 0; i < k; ++i) h(static_cast<Eigen::Index>(r - from), i) = history[r](b.idx[i]);
            const Matrix c = h.rowwise() - h.colwise().mean();
            Matrix cov = c.transpose() * c / static_cast<double>(std::max<Eigen::Index>(1, h.rows() - 1));
            for (Eigen::Index i = 0; i < k; ++i) {
              const double w = bounds[b.idx[i]].width();
              cov(i, i) += 1e-10 * w * w;
            }
            Eigen::LLT<Matrix> llt(cov);
            if (llt.info() == Eigen::Success && cov.diagonal().maxCoeff() > 0.0) {
              // Rescale so that the tuned step size keeps its meaning.
              Matrix l = llt.matrixL();
              const double old_norm = b.chol.diagonal().norm();
              const double new_norm = l.diagonal().norm();
              if (new_norm > 0.0 && old_norm > 0.0) {
                b.chol = l;
                b.scale *= old_norm / new_norm;
              }
            }
          }
        }
      }
    }

    if (s >= first_kept) {
      out.draws.row(s - first_kept) = theta.transpose();
      out.crit(s - first_kept) = cur;
    }
  }
  if (tries > 0 && accepts == 0)
    fail(ErrorCode::AllProposalsRejected, "chain " + std::to_string(chain) + " rejected every proposal");
  out.acceptance = tries > 0 ? static_cast<double>(accepts) / static_cast<double>(tries) : 0.0;
  out.scales = Vector::Zero(d);
  for (const auto& b : st)
    for (std::size_t i = 0; i < b.idx.size(); ++i)
      out.scales(b.idx[i]) = b.scale * b.chol.row(static_cast<Eigen::Index>(i)).norm();
  return out;
}

}  // namespace

IdentifiedSetDraws run_mcmc(const CriterionFn& crit, const ParamVector& prior, const McmcConfig& config,
                            long n_obs) {
  const int d = prior.size();
  if (d == 0) fail(ErrorCode::InvalidArgument, "no parameters to sample");
  if (static_cast<int>(prior.bounds.size()) != d) fail(ErrorCode::InvalidArgument, "bounds missing");
  for (const auto& b : prior.bounds)
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.lo > b.hi)
      fail(ErrorCode::InvalidArgument, "MCMC needs finite, nonempty bounds");
  if (config.chains < 1 || config.steps <= config.burn_in || config.burn_in < 0 || config.retained < 1)
    fail(ErrorCode::InvalidArgument, "need chains >= 1, steps > burn_in >= 0, retained >= 1");
  if (config.adapt_every < 1) fail(ErrorCode::InvalidArgument, "adapt_every must be positive");

  std::vector<std::vector<int>> blocks = config.blocks;
  if (blocks.empty()) {
    blocks.emplace_back();
    for (int i = 0; i < d; ++i) blocks[0].push_back(i);
  }
  {
    std::vector<int> seen(d, 0);
    for (const auto& b : blocks)
      for (int i : b) {
        if (i < 0 || i >= d) fail(ErrorCode::InvalidArgument, "block index out of range");
        ++seen[i];
      }
    for (int i = 0; i < d; ++i)
      if (seen[i] != 1) fail(ErrorCode::InvalidArgument, "blocks must partition the parameters");
  }
  blocks.erase(std::remove_if(blocks.begin(), blocks.end(), [](const auto& b) { return b.empty(); }),
               blocks.end());

  std::vector<ChainResult> results(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  const int workers = std::max(1, std::min(config.workers, config.chains));
  auto work = [&](int w) {
    for (int c = w; c < config.chains; c += workers) {
      try {
        results[c] = run_chain(crit, prior, config, blocks, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  IdentifiedSetDraws out;
  out.names = prior.names;
  out.bounds = prior.bounds;
  out.n_obs = n_obs;
  out.blocks = blocks;
  out.burn_in = config.burn_in;
  Eigen::Index total = 0;
  for (const auto& r : results) total += r.draws.rows();
  out.draws.resize(total, d);
  out.crit.resize(total);
  Eigen::Index row = 0;
  double acc = 0.0;
  for (const auto& r : results) {
    out.draws.middleRows(row, r.draws.rows()) = r.draws;
    out.crit.segment(row, r.crit.size()) = r.crit;
    row += r.draws.rows();
    out.chain_acceptance.push_back(r.acceptance);
    out.proposal_scales.push_back(r.scales);
    acc += r.acceptance;
  }
  out.acceptance_rate = acc / static_cast<double>(config.chains);
  if (out.acceptance_rate < 0.1 || out.acceptance_rate > 0.6) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "acceptance rate %.3f outside [0.1, 0.6] after adaptation",
                  out.acceptance_rate);
    out.warnings.emplace_back(buf);
  }
  return out;
}

double cutoff_value(const std::string& rule, long n) {
  if (n < 2) fail(ErrorCode::InvalidArgument, "cutoff rules need the sample size n >= 2");
  const double dn = static_cast<double>(n);
  if (rule == "log n") return std::log(dn);
  if (rule == "2 log n") return 2.0 * std::log(dn);
  if (rule == "sqrt n") return std::sqrt(dn);
  if (rule == "log log n") {
    if (n < 3) fail(ErrorCode::InvalidArgument, "'log log n' needs n >= 3");
    return std::log(std::log(dn));
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(rule, &pos);
    if (pos == rule.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::InvalidArgument, "unknown cutoff rule '" + rule + "'");
}

namespace {

void hull(const IdentifiedSetDraws& d, const std::vector<bool>& mask, Vector& lo, Vector& hi) {
  const Eigen::Index k = d.draws.cols();
  lo = Vector::Constant(k, std::numeric_limits<double>::infinity());
  hi = Vector::Constant(k, -std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < d.draws.rows(); ++i) {
    if (!mask[i]) continue;
    lo = lo.cwiseMin(d.draws.row(i).transpose());
    hi = hi.cwiseMax(d.draws.row(i).transpose());
  }
}

}  // namespace

SetEstimate extract_set(const IdentifiedSetDraws& draws, double nu, const std::vector<std::string>& sweep_rules) {
  const Eigen::Index m = draws.draws.rows();
  if (m == 0) fail(ErrorCode::InvalidArgument, "no draws");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m; ++i) best = std::min(best, draws.crit(i));
  if (!std::isfinite(best)) fail(ErrorCode::NonFiniteCriterion, "every draw has an infinite criterion");

  auto membership = [&](double cut, long& count) {
    std::vector<bool> mask(m, false);
    count = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      // log Pi = -L_n, so max log Pi - log Pi(theta) = L_n(theta) - min L_n.
      if (std::isfinite(draws.crit(i)) && draws.crit(i) - best <= cut) {
        mask[i] = true;
        ++count;
      }
    }
    return mask;
  };

  SetEstimate est;
  est.cutoff = nu;
  est.mask = membership(nu, est.members);
  if (est.members == 0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "no draw within cutoff %.6g; the smallest cutoff with a nonempty set is 0",
                  nu);
    fail(ErrorCode::EmptySetAtCutoff, buf);
  }
  hull(draws, est.mask, est.lower, est.upper);

  const Eigen::Index k = draws.draws.cols();
  est.cs_quantiles.resize(k, 2);
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<double> col;
    col.reserve(m);
    for (Eigen::Index i = 0; i < m; ++i)
      if (std::isfinite(draws.crit(i))) col.push_back(draws.draws(i, j));
    std::sort(col.begin(), col.end());
    est.cs_quantiles(j, 0) = quantile_sorted(col, 0.025);
    est.cs_quantiles(j, 1) = quantile_sorted(col, 0.975);
  }

  for (const auto& rule : sweep_rules) {
    CutoffSweepRow row;
    row.rule = rule;
    row.nu = cutoff_value(rule, draws.n_obs);
    auto mask = membership(row.nu, row.members);
    hull(draws, mask, row.lower, row.upper);
    est.sweep.push_back(row);
  }
  std::sort(est.sweep.begin(), est.sweep.end(), [](const auto& a, const auto& b) { return a.nu < b.nu; });
  // Level sets are nested by construction; check it.
  for (std::size_t i = 1; i < est.sweep.size(); ++i)
    if (est.sweep[i].members < est.sweep[i - 1].members)
      fail(ErrorCode::NumericalFailure, "cutoff sweep is not nested");
  return est;
}

std::string format_quantile_row(const std::string& name, double lo, double hi) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.3f,%.3f", name.c_str(), lo, hi);
  return buf;
}

}  // namespace setid
