#include "setid/csv_io.hpp"

#include "setid/config.hpp"
#include "setid/errors.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace setid {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

TimeSeriesTable parse_timeseries(std::string_view text, const std::string& source) {
  std::vector<std::pair<int, std::string>> lines;
  std::size_t start = 0;
  int number = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string line = trim(text.substr(start, end - start));
    if (!line.empty()) lines.emplace_back(number, line);
    start = end + 1;
  }
  if (lines.empty()) fail(ErrorCode::IoError, source + ": empty file");
  TimeSeriesTable t;
  const auto header = split_cells(lines.front().second);
  if (header.size() < 2) fail(ErrorCode::RaggedRows, source + ": header needs a label column and at least one series");
  t.columns.assign(header.begin() + 1, header.end());
  const auto n = static_cast<Eigen::Index>(t.columns.size());
  t.values.resize(static_cast<Eigen::Index>(lines.size() - 1), n);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [line_no, line] = lines[r];
    const auto cells = split_cells(line);
    if (cells.size() != header.size())
      fail(ErrorCode::RaggedRows, source + ": line " + std::to_string(line_no) + " (row " + std::to_string(r) +
                                      ") has " + std::to_string(cells.size()) + " cells, expected " +
                                      std::to_string(header.size()));
    t.labels.push_back(cells[0]);
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::string& cell = cells[static_cast<std::size_t>(j) + 1];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
        fail(ErrorCode::NonNumericCell, source + ": line " + std::to_string(line_no) + " (row " + std::to_string(r) +
                                            "), column '" + t.columns[static_cast<std::size_t>(j)] + "': '" + cell +
                                            "' is not a finite number");
      t.values(static_cast<Eigen::Index>(r - 1), j) = v;
    }
  }
  return t;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorCode::IoError, "write to '" + path + "' failed");
}

TimeSeriesTable load_timeseries(const std::string& path) { return parse_timeseries(read_text_file(path), path); }

SurveySeries parse_survey(std::string_view text, const std::string& column, const std::string& source) {
  const TimeSeriesTable t = parse_timeseries(text, source);
  Eigen::Index col = 0;
  if (!column.empty()) {
    col = -1;
    for (std::size_t j = 0; j < t.columns.size(); ++j)
      if (t.columns[j] == column) col = static_cast<Eigen::Index>(j);
    if (col < 0) fail(ErrorCode::InvalidArgument, source + ": no survey column '" + column + "'");
  }
  SurveySeries s;
  s.question_id = t.columns[static_cast<std::size_t>(col)];
  s.b = t.values.col(col);
  for (Eigen::Index r = 0; r < s.b.size(); ++r)
    if (s.b(r) < 0.0 || s.b(r) > 1.0)
      fail(ErrorCode::SurveyOutOfRange, source + ": row " + std::to_string(r + 1) + ", column '" + s.question_id +
                                            "': " + format_double(s.b(r)) + " outside [0, 1]");
  return s;
}

SurveySeries load_survey(const std::string& path, const std::string& column) {
  return parse_survey(read_text_file(path), column, path);
}

std::string format_timeseries(const TimeSeriesTable& table) {
  std::ostringstream o;
  o << "period";
  for (const auto& c : table.columns) o << "," << c;
  o << "\n";
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    o << (static_cast<std::size_t>(r) < table.labels.size() ? table.labels[static_cast<std::size_t>(r)]
                                                            : std::to_string(r + 1));
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) o << "," << format_double(table.values(r, j));
    o << "\n";
  }
  return o.str();
}

void write_timeseries(const std::string& path, const TimeSeriesTable& table) {
  write_text_file(path, format_timeseries(table));
}

}  // namespace setid
