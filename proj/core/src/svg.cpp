#include "setid/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace setid {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v, int digits = 2) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string render_line_plot(const std::string& title, const std::vector<PlotSeries>& series,
                             const std::string& x_label, const std::string& y_label) {
  constexpr double W = 720, H = 360, left = 70, right = 150, top = 40, bottom = 50;
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -ymin;
  Eigen::Index n = 1;
  for (const auto& s : series) {
    n = std::max(n, s.y.size());
    for (Eigen::Index i = 0; i < s.y.size(); ++i) {
      ymin = std::min(ymin, s.y(i));
      ymax = std::max(ymax, s.y(i));
    }
  }
  if (!std::isfinite(ymin)) ymin = -1, ymax = 1;
  ymin = std::min(ymin, 0.0);
  ymax = std::max(ymax, 0.0);
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double i) { return left + (n > 1 ? i / static_cast<double>(n - 1) : 0.5) * pw; };
  auto sy = [&](double v) { return top + (ymax - v) / (ymax - ymin) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  o << "<g stroke=\"black\" stroke-width=\"1\">\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
  o << "</g>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << num(sy(0.0)) << "\" x2=\"" << left + pw << "\" y2=\"" << num(sy(0.0))
    << "\" stroke=\"#999\" stroke-dasharray=\"2,2\"/>\n";
  o << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = ymin + (ymax - ymin) * k / 5.0;
    o << "<line x1=\"" << left - 4 << "\" y1=\"" << num(sy(v)) << "\" x2=\"" << left << "\" y2=\"" << num(sy(v))
      << "\" stroke=\"black\"/><text x=\"" << left - 6 << "\" y=\"" << num(sy(v) + 3)
      << "\" text-anchor=\"end\">" << num(v, 3) << "</text>\n";
    const double i = (n - 1) * k / 5.0;
    o << "<line x1=\"" << num(sx(i)) << "\" y1=\"" << top + ph << "\" x2=\"" << num(sx(i)) << "\" y2=\""
      << top + ph + 4 << "\" stroke=\"black\"/><text x=\"" << num(sx(i)) << "\" y=\"" << top + ph + 16
      << "\" text-anchor=\"middle\">" << static_cast<long>(std::lround(i + 1)) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << escape(x_label)
    << "</text>\n";
  if (!y_label.empty())
    o << "<text x=\"15\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 15 " << top + ph / 2
      << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  o << "</g>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\"";
    if (s.dashed) o << " stroke-dasharray=\"5,3\"";
    o << " data-name=\"" << escape(s.name) << "\" data-values=\"";
    for (Eigen::Index i = 0; i < s.y.size(); ++i) o << (i ? " " : "") << num(s.y(i), 6);
    o << "\" points=\"";
    for (Eigen::Index i = 0; i < s.y.size(); ++i)
      o << (i ? " " : "") << num(sx(static_cast<double>(i))) << "," << num(sy(s.y(i)));
    o << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << s.color << "\"/><text x=\"" << left + pw + 34 << "\" y=\"" << ly + 3
      << "\" font-family=\"sans-serif\" font-size=\"10\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace setid
