#pragma once

#include <utility>
#include <vector>

#include "ivbart/tree.hpp"

namespace ivbart {

// Evaluation kernels for trained ensembles. Each has a plain serial form used
// as the reference in tests and an OpenMP form that only ever writes disjoint
// slots, so results are bit-identical to the serial form at any thread count
// (reductions happen serially afterwards).

// out(i) = sum over trees of the leaf payload for row i of x
void predict_rows_serial(const std::vector<RegressionTree>& trees,
                         const CutpointGrid& grid, const Mat& x,
                         const Vec& exposure, Vec& out);
void predict_rows_omp(const std::vector<RegressionTree>& trees,
                      const CutpointGrid& grid, const Mat& x,
                      const Vec& exposure, Vec& out);

// One partial-dependence evaluation point: columns forced to fixed values,
// and (for linear-leaf ensembles) the exposure forced as well.
struct PdPoint {
  std::vector<std::pair<int, double>> overrides;
  bool has_exposure = false;
  double exposure = 0.0;
};

// cells(p, i) = ensemble value at background row i with point p's overrides
void pd_cells_serial(const std::vector<RegressionTree>& trees,
                     const CutpointGrid& grid, const Mat& background,
                     const std::vector<PdPoint>& points, Mat& cells);
void pd_cells_omp(const std::vector<RegressionTree>& trees,
                  const CutpointGrid& grid, const Mat& background,
                  const std::vector<PdPoint>& points, Mat& cells);

// row means of the cell matrix, reduced in fixed serial order
Vec pd_profile(const Mat& cells);

}  // namespace ivbart
