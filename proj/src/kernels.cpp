#include "ivbart/kernels.hpp"

namespace ivbart {

namespace {

double sum_of_trees(const std::vector<RegressionTree>& trees,
                    const CutpointGrid& grid, const Mat& x, int row,
                    const Vec& exposure) {
  double acc = 0.0;
  const double t = exposure.size() > 0 ? exposure(row) : 0.0;
  for (const RegressionTree& tree : trees) {
    const int leaf = tree.find_leaf([&](int v) { return x(row, v); }, grid);
    acc += leaf_value(tree, leaf, t);
  }
  return acc;
}

double sum_of_trees_pd(const std::vector<RegressionTree>& trees,
                       const CutpointGrid& grid, const Mat& background, int row,
                       const PdPoint& point) {
  const auto xcol = [&](int v) {
    for (const auto& [col, val] : point.overrides)
      if (col == v) return val;
    return background(row, v);
  };
  double acc = 0.0;
  for (const RegressionTree& tree : trees) {
    const int leaf = tree.find_leaf(xcol, grid);
    acc += leaf_value(tree, leaf, point.has_exposure ? point.exposure : 0.0);
  }
  return acc;
}

}  // namespace

void predict_rows_serial(const std::vector<RegressionTree>& trees,
                         const CutpointGrid& grid, const Mat& x,
                         const Vec& exposure, Vec& out) {
  out.resize(x.rows());
  for (int i = 0; i < x.rows(); ++i)
    out(i) = sum_of_trees(trees, grid, x, i, exposure);
}

void predict_rows_omp(const std::vector<RegressionTree>& trees,
                      const CutpointGrid& grid, const Mat& x,
                      const Vec& exposure, Vec& out) {
  out.resize(x.rows());
  const int n = static_cast<int>(x.rows());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    out(i) = sum_of_trees(trees, grid, x, i, exposure);
}

void pd_cells_serial(const std::vector<RegressionTree>& trees,
                     const CutpointGrid& grid, const Mat& background,
                     const std::vector<PdPoint>& points, Mat& cells) {
  cells.resize(points.size(), background.rows());
  for (size_t p = 0; p < points.size(); ++p)
    for (int i = 0; i < background.rows(); ++i)
      cells(p, i) = sum_of_trees_pd(trees, grid, background, i, points[p]);
}

void pd_cells_omp(const std::vector<RegressionTree>& trees,
                  const CutpointGrid& grid, const Mat& background,
                  const std::vector<PdPoint>& points, Mat& cells) {
  cells.resize(points.size(), background.rows());
  const int np = static_cast<int>(points.size());
  const int nb = static_cast<int>(background.rows());
#pragma omp parallel for collapse(2) schedule(static)
  for (int p = 0; p < np; ++p)
    for (int i = 0; i < nb; ++i)
      cells(p, i) = sum_of_trees_pd(trees, grid, background, i, points[p]);
}

Vec pd_profile(const Mat& cells) {
  Vec out(cells.rows());
  for (int p = 0; p < cells.rows(); ++p) {
    double acc = 0.0;
    for (int i = 0; i < cells.cols(); ++i) acc += cells(p, i);
    out(p) = acc / static_cast<double>(cells.cols());
  }
  return out;
}

}  // namespace ivbart
