#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "ivbart/io.hpp"

using namespace ivbart;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const std::string& name) {
  return fs::temp_directory_path() / ("ivbart_io_" + name);
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("double formatting round-trips bit-exactly") {
  const double cases[] = {0.0,
                          -0.0,
                          1.0 / 3.0,
                          0.1,
                          -2.5,
                          M_PI,
                          1e-308,
                          5e-324,  // smallest denormal
                          1.7e308,
                          123456789.123456789,
                          -9.87654321e-15};
  for (double x : cases) {
    const std::string s = format_double(x);
    CHECK(same_bits(parse_double_strict(s, "test"), x));
  }
}

TEST_CASE("strict parsing rejects partial numbers and cites the location") {
  CHECK(parse_double_strict("42", "x") == 42.0);
  CHECK(parse_double_strict("-1e-3", "x") == -1e-3);
  for (const char* bad : {"", "1.5x", "1e", "--2", " 1", "1 ", "0x10", "."}) {
    CHECK_THROWS_WITH_AS(parse_double_strict(bad, "row 7 column 'y'"),
                         doctest::Contains("row 7 column 'y'"),
                         std::exception);
  }
}

TEST_CASE("atomic text writes replace the target") {
  const fs::path p = tmp_file("atomic.txt");
  write_text_atomic(p.string(), "first\n");
  CHECK(read_text(p.string()) == "first\n");
  write_text_atomic(p.string(), "second\n");
  CHECK(read_text(p.string()) == "second\n");
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
  fs::remove(p);
}

TEST_CASE("numeric CSV round trip is lossless") {
  const fs::path p = tmp_file("roundtrip.csv");
  const std::vector<std::string> cols = {"a", "b", "c"};
  const std::vector<std::vector<double>> rows = {
      {1.0 / 3.0, -0.0, 5e-324},
      {M_PI, 1.7e308, -9.87654321e-15},
      {42.0, 0.1, -2.5}};
  write_csv_numeric(p.string(), {"provenance line", "another"}, cols, rows);
  const Csv csv = read_csv(p.string());
  CHECK(csv.columns == cols);
  REQUIRE(csv.rows.size() == rows.size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c)
      CHECK(same_bits(csv.rows[r][c], rows[r][c]));
  CHECK(csv.col("b") == 1);
  CHECK(csv.col("nope") == -1);
  CHECK(csv.col_required("c") == 2);
  CHECK_THROWS_WITH_AS(csv.col_required("nope"), doctest::Contains("nope"),
                       std::exception);
  fs::remove(p);
}

TEST_CASE("CSV ingestion is strict") {
  SUBCASE("non-numeric cell cites file, line, and column") {
    const fs::path p = tmp_file("badcell.csv");
    write_text_atomic(p.string(), "# comment\nx,y\n1,2\n3,oops\n");
    CHECK_THROWS_WITH_AS(read_csv(p.string()), doctest::Contains(":4"),
                         std::exception);
    try {
      read_csv(p.string());
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      CHECK(msg.find("column 'y'") != std::string::npos);
      CHECK(msg.find("oops") != std::string::npos);
    }
    fs::remove(p);
  }
  SUBCASE("ragged rows are rejected with counts") {
    const fs::path p = tmp_file("ragged.csv");
    write_text_atomic(p.string(), "x,y\n1,2\n3\n");
    CHECK_THROWS_WITH_AS(read_csv(p.string()),
                         doctest::Contains("expected 2 cells, got 1"),
                         std::exception);
    fs::remove(p);
  }
  SUBCASE("missing header is an error") {
    const fs::path p = tmp_file("empty.csv");
    write_text_atomic(p.string(), "# only comments\n\n");
    CHECK_THROWS_WITH_AS(read_csv(p.string()), doctest::Contains("header"),
                         std::exception);
    fs::remove(p);
  }
  SUBCASE("missing file is an error") {
    CHECK_THROWS(read_csv("/nonexistent/nope.csv"));
  }
}

TEST_CASE("posterior draw files round-trip bit-exactly") {
  PosteriorDraws draws;
  draws.seed = 123456789012345ULL;
  draws.chains = 2;
  draws.grid = {{-2.5, -0.5}, {0.0, 0.5}, {2.5, 0.5}};
  draws.extrapolated = {true, false, false};
  draws.y_mean = 1.0 / 3.0;
  draws.t_mean = -0.125;
  draws.rho_i_mean = Mat(2, 4);
  draws.rho_i_mean << 0.1, 0.2, 0.3, 0.4, -0.7, M_PI / 4, 5e-324, 0.0;
  for (int c = 0; c < 2; ++c)
    for (int d = 0; d < 2; ++d) {
      DrawRecord rec;
      rec.chain = c;
      rec.iteration = d;
      rec.grid_f2 = Vec(3);
      rec.grid_f2 << 0.1 * c + d, -1.0 / 3.0, 1e-17;
      rec.beta = c == 0 ? std::numeric_limits<double>::quiet_NaN()
                        : 1.234567890123456;
      rec.rho_bar = 0.69999999999999996;
      rec.n_clusters = 3;
      rec.sigma_t = 1.01;
      rec.sigma_y = 0.99;
      rec.log_density = -1234.5678901234567;
      draws.records.push_back(rec);
    }

  const fs::path p = tmp_file("draws.jsonl");
  write_draws(p.string(), draws, 0xDEADBEEFULL);
  const PosteriorDraws back = read_draws(p.string());

  CHECK(back.schema == draws.schema);
  CHECK(back.seed == draws.seed);
  CHECK(back.chains == 2);
  REQUIRE(back.grid.size() == 3);
  for (size_t g = 0; g < 3; ++g) {
    CHECK(back.grid[g].t == draws.grid[g].t);
    CHECK(back.grid[g].x1 == draws.grid[g].x1);
  }
  CHECK(back.extrapolated == draws.extrapolated);
  CHECK(same_bits(back.y_mean, draws.y_mean));
  CHECK(same_bits(back.t_mean, draws.t_mean));
  REQUIRE(back.records.size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    const DrawRecord &a = draws.records[i], &b = back.records[i];
    CHECK(a.chain == b.chain);
    CHECK(a.iteration == b.iteration);
    for (int g = 0; g < 3; ++g) CHECK(same_bits(a.grid_f2(g), b.grid_f2(g)));
    CHECK(std::isnan(a.beta) == std::isnan(b.beta));
    if (!std::isnan(a.beta)) CHECK(same_bits(a.beta, b.beta));
    CHECK(same_bits(a.rho_bar, b.rho_bar));
    CHECK(a.n_clusters == b.n_clusters);
    CHECK(same_bits(a.log_density, b.log_density));
  }
  REQUIRE(back.rho_i_mean.rows() == 2);
  REQUIRE(back.rho_i_mean.cols() == 4);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i)
      CHECK(same_bits(back.rho_i_mean(c, i), draws.rho_i_mean(c, i)));

  SUBCASE("schema mismatch is an explicit error") {
    std::string text = read_text(p.string());
    const size_t pos = text.find(kSchemaVersion);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, std::strlen(kSchemaVersion), "ivbart/9");
    const fs::path p2 = tmp_file("draws_badschema.jsonl");
    write_text_atomic(p2.string(), text);
    CHECK_THROWS_WITH_AS(read_draws(p2.string()),
                         doctest::Contains("schema version mismatch"),
                         std::exception);
    fs::remove(p2);
  }
  fs::remove(p);
}

TEST_CASE("fit config parsing") {
  nlohmann::json base = {
      {"data", "demo.csv"},
      {"columns",
       {{"outcome", "y"},
        {"exposure", "t"},
        {"instruments", {"z1", "z2"}},
        {"covariates", {"x1", "x2"}}}}};
  SUBCASE("minimal config inherits defaults") {
    const FitConfig cfg = parse_fit_config(base);
    CHECK(cfg.data_path == "demo.csv");
    CHECK(cfg.outcome == "y");
    CHECK(cfg.exposure == "t");
    CHECK(cfg.instruments == std::vector<std::string>{"z1", "z2"});
    CHECK(cfg.spec.variant == Variant::NpivBartH);
    CHECK(cfg.spec.h_y == 200);
    CHECK(cfg.mcmc.chains == 3);
    CHECK(cfg.grid.t_points.size() == 5);
    CHECK(cfg.grid.x1_points.size() == 2);
  }
  SUBCASE("model, mcmc, grid, and seed keys are honored") {
    nlohmann::json j = base;
    j["model"] = {{"variant", "ivBART-g"},
                  {"error_model", "dpm"},
                  {"h_y", 25},
                  {"k_stage2", 3.0}};
    j["mcmc"] = {{"burn_in", 10}, {"draws", 20}, {"chains", 2}};
    j["grid"] = {{"t", {0.0, 1.0}}, {"x1", {0.25}}};
    j["seed"] = 99;
    const FitConfig cfg = parse_fit_config(j);
    CHECK(cfg.spec.variant == Variant::IvBartG);
    CHECK(cfg.spec.error_model == ErrorModel::Dpm);
    CHECK(cfg.spec.h_y == 25);
    CHECK(cfg.spec.k_stage2 == 3.0);
    CHECK(cfg.mcmc.draws == 20);
    CHECK(cfg.mcmc.seed == 99);
    CHECK(cfg.grid.t_points == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("unknown keys are listed") {
    nlohmann::json j = base;
    j["bogus"] = 1;
    j["extra"] = 2;
    try {
      parse_fit_config(j);
      FAIL("expected an exception");
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      CHECK(msg.find("unknown keys") != std::string::npos);
      CHECK(msg.find("bogus") != std::string::npos);
      CHECK(msg.find("extra") != std::string::npos);
    }
    nlohmann::json m = base;
    m["model"] = {{"variannt", "BART"}};
    CHECK_THROWS_WITH_AS(parse_fit_config(m), doctest::Contains("variannt"),
                         std::exception);
  }
  SUBCASE("overlapping column roles are rejected") {
    nlohmann::json j = base;
    j["columns"]["covariates"] = {"x1", "t"};
    CHECK_THROWS_WITH_AS(parse_fit_config(j), doctest::Contains("disjoint"),
                         std::exception);
  }
  SUBCASE("at least one covariate is required") {
    nlohmann::json j = base;
    j["columns"]["covariates"] = nlohmann::json::array();
    CHECK_THROWS_WITH_AS(parse_fit_config(j), doctest::Contains("covariate"),
                         std::exception);
  }
  SUBCASE("empty grid axes are rejected") {
    nlohmann::json j = base;
    j["grid"] = {{"t", nlohmann::json::array()}};
    CHECK_THROWS(parse_fit_config(j));
  }
}

TEST_CASE("study config parsing") {
  nlohmann::json j = {
      {"name", "weak"},
      {"scenarios",
       {{{"truth", "linear-g"}, {"rho", 0.5}, {"c", 0.0}, {"n", 100},
         {"replications", 3}}}},
      {"methods",
       {"2SLS", "npivBART-h",
        {{"name", "ivBART-g k=4"}, {"variant", "ivBART-g"}, {"k_stage2", 4.0}}}},
      {"mcmc", {{"burn_in", 5}, {"draws", 10}, {"chains", 1}}},
      {"output", "out"},
      {"seed", 7},
      {"parallel", 2}};
  SUBCASE("string and object method forms both work") {
    const StudyConfig cfg = parse_study_config(j);
    CHECK(cfg.name == "weak");
    REQUIRE(cfg.scenarios.size() == 1);
    CHECK(cfg.scenarios[0].truth == Truth::LinearG);
    CHECK(cfg.scenarios[0].c_signal == 0.0);
    CHECK(cfg.scenarios[0].replications == 3);
    REQUIRE(cfg.methods.size() == 3);
    CHECK(cfg.methods[0].is_tsls);
    CHECK(cfg.methods[1].name == "npivBART-h");
    CHECK(cfg.methods[1].spec.variant == Variant::NpivBartH);
    CHECK(cfg.methods[2].name == "ivBART-g k=4");
    CHECK(cfg.methods[2].spec.variant == Variant::IvBartG);
    CHECK(cfg.methods[2].spec.k_stage2 == 4.0);
    CHECK(cfg.parallel == 2);
    CHECK(cfg.seed == 7);
  }
  SUBCASE("unknown scenario keys are rejected") {
    nlohmann::json bad = j;
    bad["scenarios"][0]["replicatons"] = 5;
    CHECK_THROWS_WITH_AS(parse_study_config(bad),
                         doctest::Contains("replicatons"), std::exception);
  }
  SUBCASE("a study needs scenarios and methods") {
    nlohmann::json bad = j;
    bad["methods"] = nlohmann::json::array();
    CHECK_THROWS(parse_study_config(bad));
  }
}

TEST_CASE("config hashing is canonical") {
  const nlohmann::json a = nlohmann::json::parse(R"({"a": 1, "b": [2, 3]})");
  const nlohmann::json b = nlohmann::json::parse(R"({"b": [2, 3], "a": 1})");
  CHECK(config_hash(a) == config_hash(b));
  nlohmann::json c = a;
  c["a"] = 2;
  CHECK(config_hash(a) != config_hash(c));
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") != fnv1a64("b"));
}
