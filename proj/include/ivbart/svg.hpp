#pragma once

// Small self-contained SVG plotter for diagnostic figures: line series with
// optional shaded bands, plus histograms.  No external renderer involved; the
// output is a standalone .svg document.

#include <string>
#include <vector>

namespace ivbart {

struct SvgSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f6fb2";
  double width = 1.6;
  bool markers = false;
  std::string label;
};

struct SvgBand {
  std::vector<double> x;
  std::vector<double> lo;
  std::vector<double> hi;
  std::string color = "#1f6fb2";
  double opacity = 0.18;
};

struct SvgPlot {
  int width = 720;
  int height = 440;
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<SvgBand> bands;
  std::vector<SvgSeries> series;
  // when non-empty a histogram is drawn behind the series
  std::vector<double> hist_values;
  int hist_bins = 30;
  std::string hist_color = "#9bbfdd";

  std::string render() const;
};

void write_svg(const std::string& path, const SvgPlot& plot);

}  // namespace ivbart
