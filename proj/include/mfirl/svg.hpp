#pragma once
// Primitive SVG line charts: axes, min/max tick labels, one polyline per
// series, a small legend. Diagnostics only, deliberately minimal.

#include <string>
#include <vector>

#include "mfirl/mfg.hpp"

namespace mfirl::svg {

struct Series {
  std::string label;
  Vec x, y;  // equal length; non-finite points are skipped
};

std::string line_chart(const std::vector<Series>& series, const std::string& title,
                       int width = 720, int height = 440);

}  // namespace mfirl::svg
