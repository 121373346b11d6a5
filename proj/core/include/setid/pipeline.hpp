#pragma once

#include "setid/config.hpp"
#include "setid/csv_io.hpp"
#include "setid/moments.hpp"
#include "setid/setid_mcmc.hpp"
#include "setid/wedge_qp.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace setid {

struct MomentSetup {
  ModelSpec spec;
  Matrix data;  // T x n_y
  InstrumentSet instruments;
  std::optional<SurveySeries> survey;
  InstrumentSet survey_instruments;  // default: constant only
  SurveyOptions survey_opt;

  MomentSetup() { survey_instruments.lag_depth = 0; }
};

// theta -> moment system of the frictionless model on the data, with
// inverse-variance weights.
MomentFactory make_moment_factory(const MomentSetup& setup);

// theta -> filter innovations from row `first_row` on.
ResidualFactory make_residual_factory(const ModelSpec& spec, const Matrix& data, int first_row = 1);

// Data columns matched to the observables by header name; when no header
// matches, the first n_y columns are taken in order.
Matrix select_observables(const TimeSeriesTable& table, const ModelSpec& spec);

struct ResultBundle {
  std::string subcommand;
  std::string results_json;
  std::vector<std::pair<std::string, std::string>> files;  // relative path, content (results.json included)
  std::string manifest_json;
};

// Runs solve | filter | estimate | wedges | test | simulate. Errors carry the
// stage name in their message. `config_text` is hashed into the manifest.
ResultBundle run_pipeline(const RunConfig& config, const std::string& config_text, const std::string& subcommand);

// Writes every file plus manifest.json under out_dir.
void write_bundle(const ResultBundle& bundle, const std::string& out_dir);

}  // namespace setid
