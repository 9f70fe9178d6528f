#include "ivbart/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ivbart/common.hpp"
#include "ivbart/io.hpp"

namespace ivbart {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void pad() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

}  // namespace

std::string SvgPlot::render() const {
  const double ml = 62, mr = 18, mt = title.empty() ? 16 : 36, mb = 48;
  const double pw = width - ml - mr, ph = height - mt - mb;

  Range rx, ry;
  for (const SvgSeries& s : series) {
    for (double v : s.x) rx.add(v);
    for (double v : s.y) ry.add(v);
  }
  for (const SvgBand& b : bands) {
    for (double v : b.x) rx.add(v);
    for (double v : b.lo) ry.add(v);
    for (double v : b.hi) ry.add(v);
  }

  std::vector<int> counts;
  double h_lo = 0, h_w = 1;
  int h_max = 0;
  if (!hist_values.empty()) {
    Range hr;
    for (double v : hist_values) hr.add(v);
    if (!(hr.lo <= hr.hi)) hr = {0.0, 1.0};
    if (hr.lo == hr.hi) {
      hr.lo -= 0.5;
      hr.hi += 0.5;
    }
    const int nb = std::max(1, hist_bins);
    counts.assign(nb, 0);
    h_lo = hr.lo;
    h_w = (hr.hi - hr.lo) / nb;
    for (double v : hist_values) {
      if (!std::isfinite(v)) continue;
      int b = static_cast<int>((v - h_lo) / h_w);
      b = std::clamp(b, 0, nb - 1);
      ++counts[b];
    }
    h_max = *std::max_element(counts.begin(), counts.end());
    rx.add(hr.lo);
    rx.add(hr.hi);
    ry.add(0.0);
    ry.add(static_cast<double>(h_max));
  }
  rx.pad();
  ry.pad();

  const auto px = [&](double v) {
    return ml + pw * (v - rx.lo) / (rx.hi - rx.lo);
  };
  const auto py = [&](double v) {
    return mt + ph * (1.0 - (v - ry.lo) / (ry.hi - ry.lo));
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << num(ml + pw / 2) << "\" y=\"22\" font-size=\"15\" "
           "text-anchor=\"middle\" font-family=\"sans-serif\">"
        << escape(title) << "</text>\n";

  // frame and ticks
  out << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\""
      << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  const int nticks = 5;
  for (int i = 0; i < nticks; ++i) {
    const double fx = rx.lo + (rx.hi - rx.lo) * i / (nticks - 1);
    const double fy = ry.lo + (ry.hi - ry.lo) * i / (nticks - 1);
    out << "<line x1=\"" << num(px(fx)) << "\" y1=\"" << num(mt + ph)
        << "\" x2=\"" << num(px(fx)) << "\" y2=\"" << num(mt + ph + 5)
        << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(mt + ph + 18)
        << "\" font-size=\"11\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">"
        << num(fx) << "</text>\n";
    out << "<line x1=\"" << num(ml - 5) << "\" y1=\"" << num(py(fy))
        << "\" x2=\"" << num(ml) << "\" y2=\"" << num(py(fy))
        << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(py(fy) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\" "
           "font-family=\"sans-serif\">"
        << num(fy) << "</text>\n";
  }
  if (!xlabel.empty())
    out << "<text x=\"" << num(ml + pw / 2) << "\" y=\""
        << num(height - 10)
        << "\" font-size=\"12\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">"
        << escape(xlabel) << "</text>\n";
  if (!ylabel.empty())
    out << "<text x=\"14\" y=\"" << num(mt + ph / 2)
        << "\" font-size=\"12\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" transform=\"rotate(-90 14 "
        << num(mt + ph / 2) << ")\">" << escape(ylabel) << "</text>\n";

  for (size_t b = 0; b < counts.size(); ++b) {
    if (counts[b] == 0) continue;
    const double x0 = px(h_lo + h_w * static_cast<double>(b));
    const double x1 = px(h_lo + h_w * static_cast<double>(b + 1));
    const double y1 = py(0.0), y0 = py(counts[b]);
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\""
        << num(std::max(0.5, x1 - x0 - 0.5)) << "\" height=\""
        << num(y1 - y0) << "\" fill=\"" << hist_color << "\"/>\n";
  }

  for (const SvgBand& b : bands) {
    check(b.x.size() == b.lo.size() && b.x.size() == b.hi.size(),
          "band arrays must align");
    if (b.x.empty()) continue;
    out << "<path d=\"M";
    for (size_t i = 0; i < b.x.size(); ++i)
      out << (i ? " L" : "") << num(px(b.x[i])) << " " << num(py(b.hi[i]));
    for (size_t i = b.x.size(); i-- > 0;)
      out << " L" << num(px(b.x[i])) << " " << num(py(b.lo[i]));
    out << " Z\" fill=\"" << b.color << "\" fill-opacity=\"" << num(b.opacity)
        << "\"/>\n";
  }

  for (const SvgSeries& s : series) {
    check(s.x.size() == s.y.size(), "series arrays must align");
    if (s.x.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"" << num(s.width) << "\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i)
      out << (i ? " " : "") << num(px(s.x[i])) << "," << num(py(s.y[i]));
    out << "\"/>\n";
    if (s.markers)
      for (size_t i = 0; i < s.x.size(); ++i)
        out << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\""
            << num(py(s.y[i])) << "\" r=\"2.6\" fill=\"" << s.color
            << "\"/>\n";
  }

  // legend in the top-right corner of the panel
  double ly = mt + 14;
  for (const SvgSeries& s : series) {
    if (s.label.empty()) continue;
    out << "<line x1=\"" << num(ml + pw - 118) << "\" y1=\"" << num(ly - 4)
        << "\" x2=\"" << num(ml + pw - 98) << "\" y2=\"" << num(ly - 4)
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(ml + pw - 92) << "\" y=\"" << num(ly)
        << "\" font-size=\"11\" font-family=\"sans-serif\">"
        << escape(s.label) << "</text>\n";
    ly += 16;
  }

  out << "</svg>\n";
  return out.str();
}

void write_svg(const std::string& path, const SvgPlot& plot) {
  write_text_atomic(path, plot.render());
}

}  // namespace ivbart
