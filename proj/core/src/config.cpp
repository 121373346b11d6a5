#include "setid/config.hpp"

#include "setid/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace setid {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_double(double v) {
  char buf[32];
  for (int digits = 1; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

const std::vector<std::string> kMatrices = {"G", "F", "H", "L", "R", "Sigma", "C", "Sigma_v"};

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

int code_points(std::string_view s, std::size_t upto) {
  int n = 0;
  for (std::size_t i = 0; i < upto && i < s.size(); ++i)
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) ++n;
  return n;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> split_ws(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (ss >> item) out.push_back(item);
  return out;
}

struct Line {
  int number;
  std::string raw;
  std::string key;
  std::string value;
  int value_column;  // 1-based code-point column of value start
};

[[noreturn]] void parse_fail(const Line& l, int column, const std::string& what) {
  throw ParseError(what, l.number, column);
}

double to_double(const Line& l, const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    parse_fail(l, l.value_column, "expected a number, got '" + s + "'");
  return v;
}

long to_long(const Line& l, const std::string& s) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) parse_fail(l, l.value_column, "expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const Line& l, const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  parse_fail(l, l.value_column, "expected true or false, got '" + s + "'");
}

int to_sign(const Line& l, const std::string& s) {
  if (s == "+" || s == "+1" || s == "1") return 1;
  if (s == "-" || s == "-1") return -1;
  if (s == "0") return 0;
  parse_fail(l, l.value_column, "friction sign must be +1, -1 or 0, got '" + s + "'");
}

struct PendingEntry {
  Line line;
  std::string matrix;
  int row, col;
  std::size_t value_offset;
};

}  // namespace

std::vector<std::string> RunConfig::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& p : parameters) out.push_back(p.name);
  return out;
}

ParamVector RunConfig::param_vector() const {
  ParamVector pv;
  pv.values.resize(static_cast<Eigen::Index>(parameters.size()));
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    pv.names.push_back(parameters[i].name);
    pv.values(static_cast<Eigen::Index>(i)) = parameters[i].value;
    pv.bounds.push_back({parameters[i].lo, parameters[i].hi});
    if (parameters[i].friction) pv.friction_block.push_back(static_cast<int>(i));
  }
  return pv;
}

std::vector<int> RunConfig::signs() const {
  std::vector<int> out;
  for (const auto& o : observables) out.push_back(o.second);
  if (out.empty()) out.assign(static_cast<std::size_t>(n_x), 0);
  return out;
}

int RunConfig::observable_index(const std::string& name) const {
  for (std::size_t i = 0; i < observables.size(); ++i)
    if (observables[i].first == name) return static_cast<int>(i);
  return -1;
}

ModelSpec RunConfig::model_spec() const {
  ModelSpec spec;
  spec.n_x = n_x;
  spec.n_z = n_z;
  spec.n_y = observables.empty() ? n_x : static_cast<int>(observables.size());
  spec.params = param_vector();
  spec.friction_signs = signs();
  spec.state_names = state_names;
  spec.shock_names = shock_names;
  for (const auto& o : observables) spec.observable_names.push_back(o.first);
  if (spec.observable_names.empty()) spec.observable_names = state_names;

  auto table = std::make_shared<std::vector<MatrixEntry>>(entries);
  std::set<std::string> present;
  for (const auto& e : entries) present.insert(e.matrix);
  const int nx = n_x, nz = n_z, ny = spec.n_y;
  spec.matrix_map = [table, present, nx, nz, ny](const Vector& theta) {
    ModelMatrices m;
    m.G = Matrix::Zero(nx, nx);
    m.F = Matrix::Zero(nx, nx);
    m.H = Matrix::Zero(nx, nx);
    m.L = Matrix::Zero(nx, nz);
    m.R = Matrix::Zero(nz, nz);
    m.Sigma = present.count("Sigma") ? Matrix(Matrix::Zero(nz, nz)) : Matrix(Matrix::Identity(nz, nz));
    if (present.count("C")) m.C0 = Matrix::Zero(ny, nx);
    m.Sigma_v = Matrix::Zero(ny, ny);
    for (const auto& e : *table) {
      const double v = e.expr.eval(theta.data());
      if (e.matrix == "G") m.G(e.row, e.col) = v;
      else if (e.matrix == "F") m.F(e.row, e.col) = v;
      else if (e.matrix == "H") m.H(e.row, e.col) = v;
      else if (e.matrix == "L") m.L(e.row, e.col) = v;
      else if (e.matrix == "R") m.R(e.row, e.col) = v;
      else if (e.matrix == "Sigma") m.Sigma(e.row, e.col) = v;
      else if (e.matrix == "C") m.C0(e.row, e.col) = v;
      else m.Sigma_v(e.row, e.col) = v;
    }
    return m;
  };
  return spec;
}

McmcConfig RunConfig::mcmc_config() const {
  McmcConfig c;
  c.chains = mcmc.chains;
  c.steps = mcmc.steps;
  c.burn_in = mcmc.burn_in;
  c.retained = mcmc.retained;
  c.seed = seed;
  c.workers = workers;
  std::map<int, std::vector<int>> by_block;
  bool any = false;
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    any = any || parameters[i].block >= 0;
    by_block[std::max(parameters[i].block, 0)].push_back(static_cast<int>(i));
  }
  if (any)
    for (auto& [k, idx] : by_block) c.blocks.push_back(idx);
  return c;
}

InstrumentSet RunConfig::instrument_set() const {
  InstrumentSet s;
  s.constant = instruments.constant;
  s.lag_depth = instruments.lags;
  s.transform = instruments.transform == "positive_part" ? InstrumentTransform::PositivePart
                                                          : InstrumentTransform::Level;
  for (const auto& name : instruments.columns) {
    const int k = observable_index(name);
    if (k < 0) fail(ErrorCode::UnknownParameterName, "instrument column '" + name + "' is not an observable");
    s.columns.push_back(k);
  }
  return s;
}

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig cfg;
  cfg.source = source;
  std::string section;
  std::vector<PendingEntry> pending;
  std::set<std::string> seen_sections;
  bool have_nx = false, have_nz = false;

  std::size_t start = 0;
  int number = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string raw(text.substr(start, end - start));
    start = end + 1;
    ++number;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::size_t hash = raw.find('#');
    const std::string body = hash == std::string::npos ? raw : raw.substr(0, hash);
    const std::string t = trim(body);
    if (t.empty()) {
      if (end == text.size()) break;
      continue;
    }
    Line l{number, raw, "", "", 1};
    if (t.front() == '[') {
      if (t.back() != ']') parse_fail(l, code_points(raw, raw.find('[')) + 1, "unterminated section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      static const std::set<std::string> known = {"model",       "parameters", "matrices", "observables", "run",
                                                  "instruments", "survey",     "mcmc",     "bootstrap",   "complete",
                                                  "wedge"};
      if (!known.count(section)) parse_fail(l, code_points(raw, raw.find('[')) + 1, "unknown section '" + section + "'");
      if (section == "survey") cfg.survey.present = true;
      seen_sections.insert(section);
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) parse_fail(l, code_points(raw, raw.find_first_not_of(" \t")) + 1, "expected 'key = value'");
    l.key = trim(std::string_view(body).substr(0, eq));
    std::size_t vstart = eq + 1;
    while (vstart < body.size() && std::isspace(static_cast<unsigned char>(body[vstart]))) ++vstart;
    l.value = trim(std::string_view(body).substr(eq + 1));
    l.value_column = code_points(raw, vstart) + 1;
    if (section.empty()) parse_fail(l, 1, "entry outside any section");
    const std::string& k = l.key;
    const std::string& v = l.value;

    if (section == "model") {
      if (k == "name") cfg.model_name = v;
      else if (k == "n_x") { cfg.n_x = static_cast<int>(to_long(l, v)); have_nx = true; }
      else if (k == "n_z") { cfg.n_z = static_cast<int>(to_long(l, v)); have_nz = true; }
      else if (k == "states") cfg.state_names = split_list(v);
      else if (k == "shocks") cfg.shock_names = split_list(v);
      else parse_fail(l, 1, "unknown model key '" + k + "'");
    } else if (section == "parameters") {
      ParameterDecl p;
      p.name = k;
      const auto parts = split_ws(v);
      if (parts.size() < 3) parse_fail(l, l.value_column, "expected 'value lo hi [friction] [block=k]'");
      p.value = to_double(l, parts[0]);
      p.lo = to_double(l, parts[1]);
      p.hi = to_double(l, parts[2]);
      for (std::size_t i = 3; i < parts.size(); ++i) {
        if (parts[i] == "friction") p.friction = true;
        else if (parts[i].rfind("block=", 0) == 0) p.block = static_cast<int>(to_long(l, parts[i].substr(6)));
        else parse_fail(l, l.value_column, "unknown parameter flag '" + parts[i] + "'");
      }
      if (!(p.lo <= p.value && p.value <= p.hi)) parse_fail(l, l.value_column, "value outside [lo, hi]");
      for (const auto& q : cfg.parameters)
        if (q.name == p.name) parse_fail(l, 1, "duplicate parameter '" + p.name + "'");
      cfg.parameters.push_back(p);
    } else if (section == "matrices") {
      const std::size_t br = k.find('[');
      if (br == std::string::npos || k.back() != ']') parse_fail(l, 1, "expected 'M[i,j] = expression'");
      const std::string name = trim(std::string_view(k).substr(0, br));
      if (std::find(kMatrices.begin(), kMatrices.end(), name) == kMatrices.end())
        parse_fail(l, 1, "unknown matrix '" + name + "'");
      const auto idx = split_list(k.substr(br + 1, k.size() - br - 2));
      if (idx.size() != 2) parse_fail(l, 1, "expected two indices");
      PendingEntry pe{l, name, static_cast<int>(to_long(l, idx[0])) - 1, static_cast<int>(to_long(l, idx[1])) - 1,
                      vstart};
      pending.push_back(pe);
    } else if (section == "observables") {
      cfg.observables.emplace_back(k, to_sign(l, v));
    } else if (section == "run") {
      if (k == "data") cfg.data_file = v;
      else if (k == "out") cfg.out_dir = v;
      else if (k == "seed") cfg.seed = static_cast<std::uint64_t>(to_long(l, v));
      else if (k == "workers") cfg.workers = static_cast<int>(to_long(l, v));
      else if (k == "simulate_T") cfg.simulate_T = static_cast<int>(to_long(l, v));
      else parse_fail(l, 1, "unknown run key '" + k + "'");
    } else if (section == "instruments") {
      if (k == "constant") cfg.instruments.constant = to_bool(l, v);
      else if (k == "lags") cfg.instruments.lags = static_cast<int>(to_long(l, v));
      else if (k == "transform") {
        if (v != "level" && v != "positive_part") parse_fail(l, l.value_column, "transform must be level or positive_part");
        cfg.instruments.transform = v;
      } else if (k == "columns") cfg.instruments.columns = split_list(v);
      else parse_fail(l, 1, "unknown instruments key '" + k + "'");
    } else if (section == "survey") {
      if (k == "file") cfg.survey.file = v;
      else if (k == "column") cfg.survey.column = v;
      else if (k == "question") cfg.survey.question = v;
      else if (k == "targets") cfg.survey.targets = split_list(v);
      else if (k == "strict") cfg.survey.strict = to_bool(l, v);
      else if (k == "instruments") {
        if (v != "constant" && v != "macro") parse_fail(l, l.value_column, "survey instruments must be constant or macro");
        cfg.survey.instruments = v;
      }
      else parse_fail(l, 1, "unknown survey key '" + k + "'");
    } else if (section == "mcmc") {
      if (k == "chains") cfg.mcmc.chains = static_cast<int>(to_long(l, v));
      else if (k == "steps") cfg.mcmc.steps = static_cast<int>(to_long(l, v));
      else if (k == "burn_in") cfg.mcmc.burn_in = static_cast<int>(to_long(l, v));
      else if (k == "retained") cfg.mcmc.retained = to_long(l, v);
      else if (k == "cutoff") cfg.mcmc.cutoff = v;
      else if (k == "sweep") cfg.mcmc.sweep = split_list(v);
      else parse_fail(l, 1, "unknown mcmc key '" + k + "'");
    } else if (section == "bootstrap") {
      if (k == "B") cfg.bootstrap.B = static_cast<int>(to_long(l, v));
      else if (k == "alpha") cfg.bootstrap.alpha = to_double(l, v);
      else if (k == "block_length") cfg.bootstrap.block_length = static_cast<int>(to_long(l, v));
      else parse_fail(l, 1, "unknown bootstrap key '" + k + "'");
    } else if (section == "complete") {
      cfg.complete[k] = to_double(l, v);
    } else if (section == "wedge") {
      if (k == "type") {
        if (v != "none" && v != "ar" && v != "threshold") parse_fail(l, l.value_column, "wedge type must be none, ar or threshold");
        cfg.wedge.type = v;
      } else if (k == "observable") cfg.wedge.observable = v;
      else if (k == "rho") cfg.wedge.rho = to_double(l, v);
      else if (k == "sigma") cfg.wedge.sigma = to_double(l, v);
      else if (k == "threshold") cfg.wedge.threshold = to_double(l, v);
      else if (k == "scale") cfg.wedge.scale = to_double(l, v);
      else parse_fail(l, 1, "unknown wedge key '" + k + "'");
    }
    if (end == text.size()) break;
  }

  if (!have_nx || !have_nz || cfg.n_x <= 0 || cfg.n_z <= 0)
    fail(ErrorCode::DimensionMismatch, source + ": [model] must declare positive n_x and n_z");
  if (cfg.state_names.empty())
    for (int i = 0; i < cfg.n_x; ++i) cfg.state_names.push_back("x" + std::to_string(i + 1));
  if (cfg.shock_names.empty())
    for (int i = 0; i < cfg.n_z; ++i) cfg.shock_names.push_back("z" + std::to_string(i + 1));
  if (static_cast<int>(cfg.state_names.size()) != cfg.n_x || static_cast<int>(cfg.shock_names.size()) != cfg.n_z)
    fail(ErrorCode::DimensionMismatch, source + ": state/shock name count does not match n_x/n_z");

  const int ny = cfg.observables.empty() ? cfg.n_x : static_cast<int>(cfg.observables.size());
  const auto names = cfg.parameter_names();
  for (const auto& pe : pending) {
    int rows = cfg.n_x, cols = cfg.n_x;
    if (pe.matrix == "L") cols = cfg.n_z;
    else if (pe.matrix == "R" || pe.matrix == "Sigma") rows = cols = cfg.n_z;
    else if (pe.matrix == "C") rows = ny;
    else if (pe.matrix == "Sigma_v") rows = cols = ny;
    if (pe.row < 0 || pe.row >= rows || pe.col < 0 || pe.col >= cols)
      fail(ErrorCode::DimensionMismatch, "line " + std::to_string(pe.line.number) + ": " + pe.matrix + "[" +
                                             std::to_string(pe.row + 1) + "," + std::to_string(pe.col + 1) +
                                             "] outside " + std::to_string(rows) + "x" + std::to_string(cols));
    MatrixEntry e;
    e.matrix = pe.matrix;
    e.row = pe.row;
    e.col = pe.col;
    e.expr = Expression::compile(pe.line.value, names, pe.line.number, pe.line.value_column);
    cfg.entries.push_back(std::move(e));
  }
  if (cfg.survey.present)
    for (const auto& t : cfg.survey.targets)
      if (cfg.observable_index(t) < 0) fail(ErrorCode::UnknownParameterName, "survey target '" + t + "' is not an observable");
  for (const auto& [name, val] : cfg.complete)
    if (std::find(names.begin(), names.end(), name) == names.end())
      fail(ErrorCode::UnknownParameterName, "[complete] names unknown parameter '" + name + "'");
  if (cfg.mcmc.burn_in >= cfg.mcmc.steps)
    fail(ErrorCode::InvalidArgument, "mcmc burn_in must be below steps");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), path);
  const auto dir = std::filesystem::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (dir / p).lexically_normal().string();
  };
  resolve(cfg.data_file);
  resolve(cfg.survey.file);
  return cfg;
}

ModelSpec parse_model_config(const std::string& path) { return load_config(path).model_spec(); }

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  o << "[model]\nname = " << c.model_name << "\nn_x = " << c.n_x << "\nn_z = " << c.n_z
    << "\nstates = " << join(c.state_names) << "\nshocks = " << join(c.shock_names) << "\n";
  o << "\n[parameters]\n";
  for (const auto& p : c.parameters) {
    o << p.name << " = " << format_double(p.value) << " " << format_double(p.lo) << " " << format_double(p.hi);
    if (p.friction) o << " friction";
    if (p.block >= 0) o << " block=" << p.block;
    o << "\n";
  }
  o << "\n[matrices]\n";
  for (const auto& m : kMatrices)
    for (const auto& e : c.entries)
      if (e.matrix == m) o << e.matrix << "[" << e.row + 1 << "," << e.col + 1 << "] = " << e.expr.canonical() << "\n";
  if (!c.observables.empty()) {
    o << "\n[observables]\n";
    for (const auto& [name, s] : c.observables) o << name << " = " << (s > 0 ? "+1" : s < 0 ? "-1" : "0") << "\n";
  }
  o << "\n[run]\n";
  if (!c.data_file.empty()) o << "data = " << c.data_file << "\n";
  o << "out = " << c.out_dir << "\nseed = " << c.seed << "\nworkers = " << c.workers
    << "\nsimulate_T = " << c.simulate_T << "\n";
  o << "\n[instruments]\nconstant = " << (c.instruments.constant ? "true" : "false")
    << "\nlags = " << c.instruments.lags << "\ntransform = " << c.instruments.transform << "\n";
  if (!c.instruments.columns.empty()) o << "columns = " << join(c.instruments.columns) << "\n";
  if (c.survey.present) {
    o << "\n[survey]\n";
    if (!c.survey.file.empty()) o << "file = " << c.survey.file << "\n";
    if (!c.survey.column.empty()) o << "column = " << c.survey.column << "\n";
    if (!c.survey.question.empty()) o << "question = " << c.survey.question << "\n";
    o << "targets = " << join(c.survey.targets) << "\nstrict = " << (c.survey.strict ? "true" : "false")
      << "\ninstruments = " << c.survey.instruments << "\n";
  }
  o << "\n[mcmc]\nchains = " << c.mcmc.chains << "\nsteps = " << c.mcmc.steps << "\nburn_in = " << c.mcmc.burn_in
    << "\nretained = " << c.mcmc.retained << "\ncutoff = " << c.mcmc.cutoff << "\nsweep = " << join(c.mcmc.sweep)
    << "\n";
  o << "\n[bootstrap]\nB = " << c.bootstrap.B << "\nalpha = " << format_double(c.bootstrap.alpha)
    << "\nblock_length = " << c.bootstrap.block_length << "\n";
  if (!c.complete.empty()) {
    o << "\n[complete]\n";
    for (const auto& [k, v] : c.complete) o << k << " = " << format_double(v) << "\n";
  }
  if (c.wedge.type != "none") {
    o << "\n[wedge]\ntype = " << c.wedge.type << "\nobservable = " << c.wedge.observable
      << "\nrho = " << format_double(c.wedge.rho) << "\nsigma = " << format_double(c.wedge.sigma)
      << "\nthreshold = " << format_double(c.wedge.threshold) << "\nscale = " << format_double(c.wedge.scale) << "\n";
  }
  return o.str();
}

}  // namespace setid
