// Regenerates the checked-in fixtures under tests/data: the demo dataset,
// the demo fit config, and the golden CLI outputs the test suite compares
// against byte for byte.  Run this target after any change that affects
// sampling output, then commit the refreshed files.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "ivbart/io.hpp"
#include "ivbart/simlab.hpp"

using namespace ivbart;
namespace fs = std::filesystem;

int main() {
  const fs::path dir = FIXTURE_DIR;
  fs::create_directories(dir);

  // demo dataset: nonlinear-h truth with confounding, small but real
  SimScenario sc;
  sc.truth = Truth::NonlinearH;
  sc.rho = 0.7;
  sc.c_signal = 1.0;
  sc.n = 120;
  sc.n_snps = 5;
  sc.n_x = 2;
  sc.seed = 20260814;
  const IVData data = generate_dataset(sc, 0);

  std::vector<std::string> columns = {"y", "t"};
  for (int j = 1; j <= 5; ++j) columns.push_back("z" + std::to_string(j));
  columns.push_back("x1");
  columns.push_back("x2");
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < sc.n; ++i) {
    std::vector<double> row = {data.y(i), data.t(i)};
    for (int j = 0; j < 5; ++j) row.push_back(data.z(i, j));
    row.push_back(data.x(i, 0));
    row.push_back(data.x(i, 1));
    rows.push_back(std::move(row));
  }
  write_csv_numeric((dir / "demo.csv").string(),
                    {"demo dataset for the test suite"}, columns, rows);

  const nlohmann::json cfg = {
      {"data", "demo.csv"},
      {"columns",
       {{"outcome", "y"},
        {"exposure", "t"},
        {"instruments", {"z1", "z2", "z3", "z4", "z5"}},
        {"covariates", {"x1", "x2"}}}},
      {"model",
       {{"variant", "npivBART-h"}, {"error_model", "dpm"}, {"h_t", 25},
        {"h_y", 25}}},
      {"mcmc",
       {{"burn_in", 50}, {"draws", 100}, {"chains", 2}}},
      {"seed", 4242}};
  write_text_atomic((dir / "fit_demo.json").string(), cfg.dump(2) + "\n");

  // golden outputs come from the CLI itself so the comparison covers the
  // whole pipeline, not just the library
  fs::remove_all(dir / "golden");
  const std::string cmd = "cd '" + dir.string() + "' && '" IVBART_BIN
                          "' fit --config fit_demo.json --output golden";
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    std::fprintf(stderr, "golden fit failed with status %d\n", rc);
    return 1;
  }
  std::printf("fixtures written to %s\n", dir.string().c_str());
  return 0;
}
