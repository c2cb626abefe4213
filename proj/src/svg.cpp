#include "mfirl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace mfirl::svg {

namespace {

const char* kPalette[8] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

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

}  // namespace

std::string line_chart(const std::vector<Series>& series, const std::string& title, int width,
                       int height) {
  const double left = 60.0, right = 20.0, top = 36.0, bottom = 42.0;
  const double px0 = left, px1 = width - right;
  const double py0 = height - bottom, py1 = top;  // y grows downward in SVG

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const Series& s : series)
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!(xmin <= xmax)) {  // no finite points at all
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  const auto sx = [&](double x) { return px0 + (x - xmin) / (xmax - xmin) * (px1 - px0); };
  const auto sy = [&](double y) { return py0 + (y - ymin) / (ymax - ymin) * (py1 - py0); };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(width / 2.0) + "\" y=\"20\" text-anchor=\"middle\" font-family= "
         "\"monospace\" font-size=\"14\">" +
         escape(title) + "</text>\n";

  // axes
  out += "<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px1) + "\" y2=\"" +
         num(py0) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px0) + "\" y2=\"" +
         num(py1) + "\" stroke=\"black\"/>\n";
  // min/max tick labels
  out += "<text x=\"" + num(px0) + "\" y=\"" + num(py0 + 16) +
         "\" font-family=\"monospace\" font-size=\"11\">" + num(xmin) + "</text>\n";
  out += "<text x=\"" + num(px1) + "\" y=\"" + num(py0 + 16) +
         "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" + num(xmax) +
         "</text>\n";
  out += "<text x=\"" + num(px0 - 6) + "\" y=\"" + num(py0) +
         "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" + num(ymin) +
         "</text>\n";
  out += "<text x=\"" + num(px0 - 6) + "\" y=\"" + num(py1 + 4) +
         "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" + num(ymax) +
         "</text>\n";

  for (size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % 8];
    std::string points;
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      points += num(sx(s.x[i])) + "," + num(sy(s.y[i])) + " ";
    }
    if (!points.empty()) points.pop_back();
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.2\" "
           "points=\"" +
           points + "\"/>\n";
    out += "<text x=\"" + num(px1 - 4) + "\" y=\"" + num(py1 + 14.0 * (k + 1)) +
           "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\" fill=\"" + color +
           "\">" + escape(s.label) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace mfirl::svg
