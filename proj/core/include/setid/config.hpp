#pragma once

#include "setid/expr.hpp"
#include "setid/model_core.hpp"
#include "setid/setid_mcmc.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace setid {

struct ParameterDecl {
  std::string name;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool friction = false;
  int block = -1;  // -1: no explicit block
};

struct MatrixEntry {
  std::string matrix;  // G F H L R Sigma C Sigma_v
  int row = 0;         // 0-based
  int col = 0;
  Expression expr;
};

struct InstrumentConfig {
  bool constant = true;
  int lags = 1;
  std::string transform = "level";  // level | positive_part
  std::vector<std::string> columns; // observables; empty = all
};

struct SurveyConfig {
  bool present = false;
  std::string file;
  std::string column;  // empty: first data column
  std::string question;
  std::vector<std::string> targets;
  bool strict = false;
  std::string instruments = "constant";  // constant | macro
};

struct McmcSettings {
  int chains = 4;
  int steps = 20000;
  int burn_in = 5000;
  long retained = 250000;
  std::string cutoff = "log n";
  std::vector<std::string> sweep = {"log n", "2 log n", "sqrt n"};
};

struct BootstrapSettings {
  int B = 2000;
  double alpha = 0.05;
  int block_length = 0;
};

// Injected wedge for `simulate`: added to one observable.
struct WedgeInjection {
  std::string type = "none";  // none | ar | threshold
  std::string observable;
  double rho = 0.5;
  double sigma = 0.1;
  double threshold = 0.0;  // threshold: wedge = scale * max(y_{t-1} - threshold, 0)
  double scale = 1.0;
};

struct RunConfig {
  std::string source;  // path or "<string>"
  std::string model_name = "model";
  int n_x = 0;
  int n_z = 0;
  std::vector<std::string> state_names;
  std::vector<std::string> shock_names;
  std::vector<ParameterDecl> parameters;
  std::vector<MatrixEntry> entries;
  std::vector<std::pair<std::string, int>> observables;  // name, friction sign

  std::string data_file;
  std::string out_dir = "out";
  std::uint64_t seed = 42;
  int workers = 1;
  int simulate_T = 500;

  InstrumentConfig instruments;
  SurveyConfig survey;
  McmcSettings mcmc;
  BootstrapSettings bootstrap;
  std::map<std::string, double> complete;  // parameter values of the complete model
  WedgeInjection wedge;

  std::vector<std::string> parameter_names() const;
  ParamVector param_vector() const;
  ModelSpec model_spec() const;
  McmcConfig mcmc_config() const;
  InstrumentSet instrument_set() const;
  std::vector<int> signs() const;
  int observable_index(const std::string& name) const;  // -1 if absent
};

// Parses the sectioned config text. Relative file paths are kept as written.
RunConfig parse_config(std::string_view text, const std::string& source = "<string>");

// Reads a file; relative data/survey paths resolve against its directory.
RunConfig load_config(const std::string& path);

// Canonical text form; parse_config(serialize_config(c)) serializes identically.
std::string serialize_config(const RunConfig& config);

ModelSpec parse_model_config(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);

// Shortest decimal that reads back to the same double.
std::string format_double(double v);

}  // namespace setid
