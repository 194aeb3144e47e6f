#pragma once

#include <string>
#include <utility>
#include <vector>

namespace pdeopt {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

// Renders a log-log scatter/line plot. Points with a nonpositive or
// non-finite coordinate are dropped. The output depends only on the
// arguments, so identical inputs produce byte-identical files.
void write_loglog_svg(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<PlotSeries>& series);

}  // namespace pdeopt
