#include "setid/pipeline.hpp"

#include "setid/errors.hpp"
#include "setid/kalman.hpp"
#include "setid/spec_test.hpp"
#include "setid/svg.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>

namespace setid {

using json = nlohmann::ordered_json;

MomentFactory make_moment_factory(const MomentSetup& setup) {
  auto s = std::make_shared<const MomentSetup>(setup);
  if (s->data.cols() != s->spec.n_y) fail(ErrorCode::DimensionMismatch, "data columns do not match the observables");
  if (s->survey) s->survey->validate(s->data.rows());
  return [s](const Vector& theta) {
    const Solution sol = solve_re(s->spec, s->spec.params.with_values(theta));
    const StateSpace ss = assemble_state_space(sol, s->spec);
    const FilterOutput f = filter(ss, s->data);
    MomentSystem ms = build_macro_moments(ss, f, s->data, s->instruments, s->spec.friction_signs);
    if (s->survey)
      add_survey_moments(ms, ss, f, s->data, *s->survey, s->survey_instruments, s->spec.friction_signs,
                         s->survey_opt);
    ms.W = inverse_variance_weights(ms);
    return ms;
  };
}

ResidualFactory make_residual_factory(const ModelSpec& spec, const Matrix& data, int first_row) {
  auto sp = std::make_shared<const ModelSpec>(spec);
  auto d = std::make_shared<const Matrix>(data);
  return [sp, d, first_row](const Vector& theta) {
    const Solution sol = solve_re(*sp, sp->params.with_values(theta));
    const StateSpace ss = assemble_state_space(sol, *sp);
    const FilterOutput f = filter(ss, *d);
    return Matrix(f.a.bottomRows(f.a.rows() - first_row));
  };
}

Matrix select_observables(const TimeSeriesTable& table, const ModelSpec& spec) {
  const int ny = spec.n_y;
  Matrix out(table.values.rows(), ny);
  bool by_name = true;
  std::vector<Eigen::Index> idx;
  for (const auto& name : spec.observable_names) {
    Eigen::Index found = -1;
    for (std::size_t j = 0; j < table.columns.size(); ++j)
      if (table.columns[j] == name) found = static_cast<Eigen::Index>(j);
    if (found < 0) by_name = false;
    idx.push_back(found);
  }
  if (!by_name || static_cast<int>(idx.size()) != ny) {
    if (table.values.cols() < ny)
      fail(ErrorCode::DimensionMismatch, "data has " + std::to_string(table.values.cols()) + " columns, model needs " +
                                             std::to_string(ny));
    return table.values.leftCols(ny);
  }
  for (int j = 0; j < ny; ++j) out.col(j) = table.values.col(idx[static_cast<std::size_t>(j)]);
  return out;
}

namespace {

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

json to_json(const Vector& v) {
  json r = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) r.push_back(v(i));
  return r;
}

template <class F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), std::string("[") + name + "] " + e.detail());
  }
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct Context {
  const RunConfig& cfg;
  ModelSpec spec;
  ResultBundle bundle;
  json results = json::object();
  json operations = json::object();  // file -> producing operation

  Context(const RunConfig& c, ModelSpec s) : cfg(c), spec(std::move(s)) {}

  void add_file(const std::string& path, std::string content, const std::string& op) {
    bundle.files.emplace_back(path, std::move(content));
    operations[path] = op;
  }
};

Vector theta_of(const RunConfig& cfg, const std::map<std::string, double>& overrides) {
  ParamVector pv = cfg.param_vector();
  for (const auto& [k, v] : overrides) pv.values(pv.index_of(k)) = v;
  return pv.values;
}

json params_json(const ModelSpec& spec, const Vector& theta) {
  json j = json::object();
  for (int i = 0; i < spec.params.size(); ++i) j[spec.params.names[static_cast<std::size_t>(i)]] = theta(i);
  return j;
}

Matrix load_data(const RunConfig& cfg, const ModelSpec& spec) {
  if (cfg.data_file.empty()) fail(ErrorCode::InvalidArgument, "[run] data is required for this subcommand");
  return select_observables(load_timeseries(cfg.data_file), spec);
}

MomentSetup moment_setup(const RunConfig& cfg, const ModelSpec& spec, const Matrix& data) {
  MomentSetup s;
  s.spec = spec;
  s.data = data;
  s.instruments = cfg.instrument_set();
  if (cfg.survey.present) {
    if (cfg.survey.file.empty()) fail(ErrorCode::InvalidArgument, "[survey] file is required");
    SurveySeries sv = load_survey(cfg.survey.file, cfg.survey.column);
    if (!cfg.survey.question.empty()) sv.question_id = cfg.survey.question;
    for (const auto& t : cfg.survey.targets) sv.target_observables.push_back(cfg.observable_index(t));
    s.survey = sv;
    s.survey_opt.strict = cfg.survey.strict;
    if (cfg.survey.instruments == "macro") s.survey_instruments = s.instruments;
  }
  return s;
}

void run_solve(Context& c) {
  const Vector theta = theta_of(c.cfg, {});
  const Solution sol = stage("solve", [&] { return solve_re(c.spec, c.spec.params.with_values(theta)); });
  const StateSpace ss = stage("state_space", [&] { return assemble_state_space(sol, c.spec); });
  const IdentificationReport id =
      stage("identification", [&] { return check_local_identification(c.spec, c.spec.params.with_values(theta)); });
  json& r = c.results;
  r["theta"] = params_json(c.spec, theta);
  r["P_star"] = to_json(sol.P_star);
  r["Q_star"] = to_json(sol.Q_star);
  r["residual_P"] = sol.residual_P;
  r["residual_Q"] = sol.residual_Q;
  r["state_space"] = {{"A", to_json(ss.A)},
                      {"B", to_json(ss.B)},
                      {"C", to_json(ss.C)},
                      {"K", to_json(ss.K)},
                      {"Sigma_a", to_json(ss.Sigma_a)},
                      {"riccati_iterations", ss.riccati_iterations},
                      {"augmented", ss.augmented},
                      {"lci3_nonsingular", ss.lci3_nonsingular}};
  r["identification"] = {{"rank", id.rank},
                         {"required", id.required},
                         {"identified", id.identified},
                         {"controllable", id.controllable},
                         {"observable", id.observable}};
  c.operations["results.json#/P_star"] = "solve_re";
  c.operations["results.json#/state_space"] = "assemble_state_space";
  c.operations["results.json#/identification"] = "check_local_identification";
}

void run_filter(Context& c) {
  const Matrix data = stage("load_data", [&] { return load_data(c.cfg, c.spec); });
  const Vector theta = theta_of(c.cfg, {});
  const FilterOutput f = stage("filter", [&] {
    const Solution sol = solve_re(c.spec, c.spec.params.with_values(theta));
    return filter(assemble_state_space(sol, c.spec), data);
  });
  const WhitenessReport w = whiteness_check(f.a, 5, std::max(0, f.converged_at));
  c.results["theta"] = params_json(c.spec, theta);
  c.results["T"] = data.rows();
  c.results["loglik"] = f.loglik;
  c.results["converged_at"] = f.converged_at;
  c.results["whiteness"] = {{"autocorr", to_json(w.autocorr)}, {"bound", w.bound}, {"white", w.white}};
  TimeSeriesTable t;
  t.columns = c.spec.observable_names;
  t.values = f.a;
  c.add_file("tables/innovations.csv", format_timeseries(t), "filter");
}

struct Estimate {
  MomentSetup setup;
  IdentifiedSetDraws draws;
  SetEstimate set;
};

Estimate run_estimate(Context& c) {
  Estimate e;
  const Matrix data = stage("load_data", [&] { return load_data(c.cfg, c.spec); });
  e.setup = stage("moments", [&] { return moment_setup(c.cfg, c.spec, data); });
  const MomentFactory factory = make_moment_factory(e.setup);
  const long n_obs = data.rows() - e.setup.instruments.first_row();
  McmcConfig mc = c.cfg.mcmc_config();
  mc.initial = c.spec.params.values;
  e.draws = stage("mcmc", [&] { return run_mcmc(criterion_from_factory(factory), c.spec.params, mc, n_obs); });
  const double nu = stage("cutoff", [&] { return cutoff_value(c.cfg.mcmc.cutoff, n_obs); });
  e.set = stage("set", [&] { return extract_set(e.draws, nu, c.cfg.mcmc.sweep); });

  json& r = c.results;
  r["n_obs"] = n_obs;
  r["cutoff"] = {{"rule", c.cfg.mcmc.cutoff}, {"nu", nu}};
  r["acceptance_rate"] = e.draws.acceptance_rate;
  r["chain_acceptance"] = e.draws.chain_acceptance;
  r["retained_draws"] = e.draws.draws.rows();
  r["members"] = e.set.members;
  json set = json::object();
  std::string table = "name,q2.5,q97.5\n";
  for (int i = 0; i < c.spec.params.size(); ++i) {
    const auto& name = c.spec.params.names[static_cast<std::size_t>(i)];
    set[name] = {{"lower", e.set.lower(i)},
                 {"upper", e.set.upper(i)},
                 {"q2.5", e.set.cs_quantiles(i, 0)},
                 {"q97.5", e.set.cs_quantiles(i, 1)}};
    table += format_quantile_row(name, e.set.cs_quantiles(i, 0), e.set.cs_quantiles(i, 1)) + "\n";
  }
  r["set"] = set;
  json sweep = json::array();
  std::string sweep_csv = "rule,nu,members";
  for (const auto& name : c.spec.params.names) sweep_csv += "," + name + "_lower," + name + "_upper";
  sweep_csv += "\n";
  for (const auto& row : e.set.sweep) {
    sweep.push_back({{"rule", row.rule}, {"nu", row.nu}, {"members", row.members}, {"lower", to_json(row.lower)},
                     {"upper", to_json(row.upper)}});
    sweep_csv += row.rule + "," + fmt3(row.nu) + "," + std::to_string(row.members);
    for (Eigen::Index i = 0; i < row.lower.size(); ++i) sweep_csv += "," + fmt3(row.lower(i)) + "," + fmt3(row.upper(i));
    sweep_csv += "\n";
  }
  r["cutoff_sweep"] = sweep;
  r["warnings"] = e.draws.warnings;
  c.add_file("tables/quantiles.csv", table, "extract_set");
  c.add_file("tables/cutoff_sweep.csv", sweep_csv, "extract_set");
  c.operations["results.json#/set"] = "extract_set";
  return e;
}

WedgeEnvelope run_wedges(Context& c, const Estimate& e) {
  const int first = e.setup.instruments.first_row();
  const ResidualFactory residuals = make_residual_factory(c.spec, e.setup.data, first);
  const WedgeEnvelope env = stage("wedges", [&] {
    return wedges_from_set(e.draws, e.set.mask, residuals, c.spec.friction_signs, 200, c.cfg.workers);
  });
  json w = json::object();
  const auto& names = c.spec.observable_names;
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    w[names[j]] = {{"lower_mean", env.lower_mean(jj)},
                   {"upper_mean", env.upper_mean(jj)},
                   {"straddles_zero", env.lower_mean(jj) <= 0.0 && env.upper_mean(jj) >= 0.0},
                   {"sign", c.spec.friction_signs[j]}};
    TimeSeriesTable t;
    t.columns = {"lower", "median", "upper"};
    t.values.resize(env.lower_path.rows(), 3);
    t.values.col(0) = env.lower_path.col(jj);
    t.values.col(1) = env.median_path.col(jj);
    t.values.col(2) = env.upper_path.col(jj);
    for (Eigen::Index r = 0; r < t.values.rows(); ++r) t.labels.push_back(std::to_string(r + first + 1));
    c.add_file("tables/wedges_" + names[j] + ".csv", format_timeseries(t), "wedges_from_set");
    const std::vector<PlotSeries> series = {{"lower", t.values.col(0), "#d62728", true},
                                            {"median", t.values.col(1), "#1f77b4", false},
                                            {"upper", t.values.col(2), "#2ca02c", true}};
    c.add_file("plots/wedges_" + names[j] + ".svg", render_line_plot("Wedge envelope: " + names[j], series, "t"),
               "wedges_from_set");
  }
  c.results["wedges"] = w;
  c.results["wedge_draws_used"] = env.draws_used.size();
  c.operations["results.json#/wedges"] = "wedges_from_set";
  return env;
}

void run_test(Context& c, const Estimate& e, const WedgeEnvelope& env) {
  const int first = e.setup.instruments.first_row();
  const Vector theta_p = theta_of(c.cfg, c.cfg.complete);
  const ResidualFactory residuals = make_residual_factory(c.spec, e.setup.data, first);
  const WedgePaths p = stage("complete_model", [&] { return wedge_paths(residuals(theta_p), c.spec.friction_signs); });
  BootstrapOptions bo;
  bo.B = c.cfg.bootstrap.B;
  bo.alpha = c.cfg.bootstrap.alpha;
  bo.block_length = c.cfg.bootstrap.block_length;
  bo.seed = c.cfg.seed;
  bo.workers = c.cfg.workers;
  const TestResult tr = stage("bootstrap", [&] { return wedge_specification_test(p.lambda, env.draw_paths, bo); });
  c.results["test"] = {{"theta_complete", params_json(c.spec, theta_p)},
                       {"lambda_p", to_json(tr.lambda_p)},
                       {"envelope_lower", to_json(tr.lower)},
                       {"envelope_upper", to_json(tr.upper)},
                       {"v_diag", to_json(tr.v_diag)},
                       {"statistic", tr.statistic},
                       {"cloud_statistic", tr.cloud_statistic},
                       {"critical_value", tr.critical_value},
                       {"alpha", tr.alpha},
                       {"B", static_cast<long>(tr.bootstrap_draws.size())},
                       {"block_length", tr.block_length},
                       {"seed", tr.seed},
                       {"reject", tr.reject}};
  std::string draws = "k,statistic\n";
  for (std::size_t k = 0; k < tr.bootstrap_draws.size(); ++k)
    draws += std::to_string(k + 1) + "," + fmt3(tr.bootstrap_draws[k]) + "\n";
  c.add_file("tables/bootstrap_draws.csv", draws, "wedge_specification_test");
  c.operations["results.json#/test"] = "wedge_specification_test";
}

void run_simulate(Context& c) {
  const Vector theta = theta_of(c.cfg, {});
  const int T = c.cfg.simulate_T;
  if (T < 2) fail(ErrorCode::InvalidArgument, "[simulate] simulate_T must be >= 2");
  SimulatedPath path = stage("simulate", [&] {
    const Solution sol = solve_re(c.spec, c.spec.params.with_values(theta));
    return simulate_state_space(assemble_state_space(sol, c.spec), T, c.cfg.seed);
  });
  Matrix y = path.y;
  const WedgeInjection& w = c.cfg.wedge;
  Vector injected = Vector::Zero(T);
  if (w.type != "none") {
    const int k = c.cfg.observable_index(w.observable);
    if (k < 0) fail(ErrorCode::UnknownParameterName, "[simulate] wedge observable '" + w.observable + "' unknown");
    std::mt19937_64 rng(splitmix64(c.cfg.seed ^ 0x77656467ULL));
    std::normal_distribution<double> nrm;
    double prev = 0.0;
    for (int t = 0; t < T; ++t) {
      if (w.type == "ar") {
        prev = w.rho * prev + w.sigma * nrm(rng);
      } else {
        prev = t > 0 ? w.scale * std::max(y(t - 1, k) - w.threshold, 0.0) : 0.0;
      }
      injected(t) = prev;
      y(t, k) += prev;
    }
  }
  TimeSeriesTable t;
  t.columns = c.spec.observable_names;
  t.values = y;
  for (int r = 0; r < T; ++r) t.labels.push_back(std::to_string(r + 1));
  c.add_file("data.csv", format_timeseries(t), "simulate_state_space");
  c.results["theta"] = params_json(c.spec, theta);
  c.results["T"] = T;
  c.results["wedge"] = {{"type", w.type}, {"observable", w.observable}, {"mean", injected.mean()}};
}

}  // namespace

ResultBundle run_pipeline(const RunConfig& config, const std::string& config_text, const std::string& subcommand) {
  static const std::vector<std::string> known = {"solve", "filter", "estimate", "wedges", "test", "simulate"};
  if (std::find(known.begin(), known.end(), subcommand) == known.end())
    fail(ErrorCode::InvalidArgument, "unknown subcommand '" + subcommand + "'");
  Context c(config, stage("config", [&] {
              ModelSpec s = config.model_spec();
              s.validate();
              return s;
            }));
  c.bundle.subcommand = subcommand;
  c.results["subcommand"] = subcommand;
  c.results["model"] = config.model_name;
  c.results["seed"] = config.seed;

  if (subcommand == "solve") {
    run_solve(c);
  } else if (subcommand == "filter") {
    run_filter(c);
  } else if (subcommand == "simulate") {
    run_simulate(c);
  } else {
    const Estimate e = run_estimate(c);
    if (subcommand != "estimate") {
      const WedgeEnvelope env = run_wedges(c, e);
      if (subcommand == "test") run_test(c, e, env);
    }
  }

  c.bundle.results_json = c.results.dump(2) + "\n";
  c.bundle.files.insert(c.bundle.files.begin(), {"results.json", c.bundle.results_json});
  c.operations["results.json"] = "run_pipeline:" + subcommand;

  json m = json::object();
  m["config_source"] = config.source;
  m["config_hash_fnv1a64"] = hex64(fnv1a64(config_text));
  m["subcommand"] = subcommand;
  m["seed"] = config.seed;
  json files = json::array();
  for (const auto& [path, content] : c.bundle.files)
    files.push_back({{"path", path}, {"bytes", content.size()}, {"fnv1a64", hex64(fnv1a64(content))}});
  m["files"] = files;
  m["operations"] = c.operations;
  c.bundle.manifest_json = m.dump(2) + "\n";
  return c.bundle;
}

void write_bundle(const ResultBundle& bundle, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& [path, content] : bundle.files) write_text_file((std::filesystem::path(out_dir) / path).string(), content);
  write_text_file((std::filesystem::path(out_dir) / "manifest.json").string(), bundle.manifest_json);
}

}  // namespace setid
