#pragma once

#include "setid/linalg.hpp"
#include "setid/moments.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace setid {

// Header row, then one row per period: label, numeric columns.
struct TimeSeriesTable {
  std::vector<std::string> columns;  // numeric column names, in file order
  std::vector<std::string> labels;   // first-column period labels
  Matrix values;                     // rows x columns
};

TimeSeriesTable parse_timeseries(std::string_view text, const std::string& source = "<string>");
TimeSeriesTable load_timeseries(const std::string& path);

// Survey shares from `column` (empty: first numeric column); every cell
// must lie in [0, 1].
SurveySeries parse_survey(std::string_view text, const std::string& column = "",
                          const std::string& source = "<string>");
SurveySeries load_survey(const std::string& path, const std::string& column = "");

// Numbers are written with enough digits to read back exactly.
std::string format_timeseries(const TimeSeriesTable& table);
void write_timeseries(const std::string& path, const TimeSeriesTable& table);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace setid
