// Benchmark comparing the serial reference kernels against the OpenMP ones.
// Prints a table of wall times and the speedup, and verifies that both paths
// produce bit-identical output before timing anything.

#include <chrono>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "ivbart/ensemble.hpp"
#include "ivbart/kernels.hpp"
#include "ivbart/rng.hpp"

using namespace ivbart;

namespace {

double now() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

Ensemble make_ensemble(int n, int p, int n_trees, Rng& rng) {
  Mat x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
  EnsembleConfig cfg;
  cfg.n_trees = n_trees;
  cfg.leaf_prior.sigma_a = leaf_prior_scale(4.0, 2.0, n_trees);
  Ensemble ens(cfg, x);
  // burn a few sweeps so the trees have structure worth traversing
  Vec target(n), v = Vec::Ones(n);
  for (int i = 0; i < n; ++i)
    target(i) = std::sin(3.0 * x(i, 0)) + 0.5 * rng.normal();
  for (int s = 0; s < 30; ++s) ens.backfit_sweep(target, v, rng);
  return ens;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now();
    f();
    best = std::min(best, now() - t0);
  }
  return best;
}

}  // namespace

int main() {
  Rng rng(20240817);
  const int n = 20000, p = 10, n_trees = 200;
  Ensemble ens = make_ensemble(2000, p, n_trees, rng);

  Mat xq(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) xq(i, j) = rng.uniform(-1.0, 1.0);

  const Vec no_exposure;
  Vec serial(n), parallel(n);
  predict_rows_serial(ens.trees(), ens.grid(), xq, no_exposure, serial);
  predict_rows_omp(ens.trees(), ens.grid(), xq, no_exposure, parallel);
  if (!(serial.array() == parallel.array()).all()) {
    std::printf("FAIL: serial and OpenMP predictions differ\n");
    return 1;
  }

  std::vector<PdPoint> points;
  for (double x1 : {-0.5, 0.5}) points.push_back({{{0, x1}}, false, 0.0});
  Mat cells_s(points.size(), n), cells_p(points.size(), n);
  pd_cells_serial(ens.trees(), ens.grid(), xq, points, cells_s);
  pd_cells_omp(ens.trees(), ens.grid(), xq, points, cells_p);
  if (!(cells_s.array() == cells_p.array()).all()) {
    std::printf("FAIL: serial and OpenMP PD cells differ\n");
    return 1;
  }

  std::printf("threads available: %d\n", omp_get_max_threads());
  std::printf("%-22s %12s %12s %9s\n", "kernel", "serial (ms)", "openmp (ms)",
              "speedup");

  const double ts = time_best_of(5, [&] {
    predict_rows_serial(ens.trees(), ens.grid(), xq, no_exposure, serial);
  });
  const double tp = time_best_of(5, [&] {
    predict_rows_omp(ens.trees(), ens.grid(), xq, no_exposure, parallel);
  });
  std::printf("%-22s %12.2f %12.2f %8.2fx\n", "predict_rows", ts * 1e3,
              tp * 1e3, ts / tp);

  const double cs = time_best_of(3, [&] {
    pd_cells_serial(ens.trees(), ens.grid(), xq, points, cells_s);
  });
  const double cp = time_best_of(3, [&] {
    pd_cells_omp(ens.trees(), ens.grid(), xq, points, cells_p);
  });
  std::printf("%-22s %12.2f %12.2f %8.2fx\n", "pd_cells", cs * 1e3, cp * 1e3,
              cs / cp);
  std::printf("outputs bit-identical across both paths\n");
  return 0;
}
