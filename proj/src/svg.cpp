#include "pdeopt/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace pdeopt {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 490, kTop = 45, kBottom = 430;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape_text(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

bool plottable(double x, double y) {
  return std::isfinite(x) && std::isfinite(y) && x > 0 && y > 0;
}

}  // namespace

void write_loglog_svg(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<PlotSeries>& series) {
  std::vector<PlotSeries> kept;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool any = false;
  for (const auto& s : series) {
    PlotSeries filtered{s.name, {}};
    for (auto [x, y] : s.points) {
      if (!plottable(x, y)) continue;
      filtered.points.emplace_back(x, y);
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = y;
        any = true;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
    if (!filtered.points.empty()) kept.push_back(std::move(filtered));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot open " + path + " for writing");

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt((kLeft + kRight) / 2) << "\" y=\"24\" "
         "font-family=\"sans-serif\" font-size=\"16\" "
         "text-anchor=\"middle\">"
      << escape_text(title) << "</text>\n";

  if (kept.empty()) {
    out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"" << fmt(kHeight / 2)
        << "\" font-family=\"sans-serif\" font-size=\"14\" "
           "text-anchor=\"middle\">no data</text>\n";
    out << "</svg>\n";
    return;
  }

  // decade bounds; widen degenerate ranges so the map stays well defined
  double lx0 = std::floor(std::log10(xmin));
  double lx1 = std::ceil(std::log10(xmax));
  double ly0 = std::floor(std::log10(ymin));
  double ly1 = std::ceil(std::log10(ymax));
  if (lx1 - lx0 < 1) lx1 = lx0 + 1;
  if (ly1 - ly0 < 1) ly1 = ly0 + 1;

  auto px = [&](double x) {
    return kLeft + (std::log10(x) - lx0) / (lx1 - lx0) * (kRight - kLeft);
  };
  auto py = [&](double y) {
    return kBottom - (std::log10(y) - ly0) / (ly1 - ly0) * (kBottom - kTop);
  };

  // frame and decade grid
  out << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\""
      << fmt(kRight - kLeft) << "\" height=\"" << fmt(kBottom - kTop)
      << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  for (int e = static_cast<int>(lx0); e <= static_cast<int>(lx1); ++e) {
    const double x = px(std::pow(10.0, e));
    out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(kTop) << "\" x2=\""
        << fmt(x) << "\" y2=\"" << fmt(kBottom)
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(kBottom + 18)
        << "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"middle\">1e"
        << e << "</text>\n";
  }
  for (int e = static_cast<int>(ly0); e <= static_cast<int>(ly1); ++e) {
    const double y = py(std::pow(10.0, e));
    out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(y) << "\" x2=\""
        << fmt(kRight) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(y + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"end\">1e"
        << e << "</text>\n";
  }

  out << "<text x=\"" << fmt((kLeft + kRight) / 2) << "\" y=\""
      << fmt(kHeight - 10)
      << "\" font-family=\"sans-serif\" font-size=\"13\" "
         "text-anchor=\"middle\">"
      << escape_text(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << fmt((kTop + kBottom) / 2)
      << "\" font-family=\"sans-serif\" font-size=\"13\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fmt((kTop + kBottom) / 2) << ")\">" << escape_text(y_label)
      << "</text>\n";

  for (std::size_t si = 0; si < kept.size(); ++si) {
    const char* color = kPalette[si % kPaletteSize];
    auto pts = kept[si].points;
    std::sort(pts.begin(), pts.end());
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) out << ' ';
      out << fmt(px(pts[i].first)) << ',' << fmt(py(pts[i].second));
    }
    out << "\"/>\n";
    for (const auto& [x, y] : pts)
      out << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y))
          << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";

    const double ly = kTop + 14 + 18 * static_cast<double>(si);
    out << "<line x1=\"" << fmt(kRight + 12) << "\" y1=\"" << fmt(ly)
        << "\" x2=\"" << fmt(kRight + 34) << "\" y2=\"" << fmt(ly)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt(kRight + 40) << "\" y=\"" << fmt(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << escape_text(kept[si].name) << "</text>\n";
  }

  out << "</svg>\n";
  out.flush();
  if (!out)
    throw std::runtime_error("write to " + path + " failed");
}

}  // namespace pdeopt
