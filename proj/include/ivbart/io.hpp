#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivbart/ivmodels.hpp"
#include "ivbart/simlab.hpp"

namespace ivbart {

// shortest decimal form that parses back to the identical double
std::string format_double(double x);
double parse_double_strict(const std::string& s, const std::string& where);

std::uint64_t fnv1a64(const std::string& s);

std::string read_text(const std::string& path);
// write to a temp file in the same directory, then rename into place
void write_text_atomic(const std::string& path, const std::string& content);

// --- CSV --------------------------------------------------------------------

// Numeric table with a header row; '#'-prefixed lines are skipped. Parsing is
// strict: every cell must be a complete number, and errors cite row/column.
struct Csv {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  int col(const std::string& name) const;          // -1 when absent
  int col_required(const std::string& name) const; // throws when absent
};

Csv read_csv(const std::string& path);

// Report-style writer: free-form string cells, '#' comment lines on top.
void write_csv(const std::string& path,
               const std::vector<std::string>& comments,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows);

// numeric dataset writer (round-trips through read_csv losslessly)
void write_csv_numeric(const std::string& path,
                       const std::vector<std::string>& comments,
                       const std::vector<std::string>& columns,
                       const std::vector<std::vector<double>>& rows);

// --- posterior draw files (JSON lines) ---------------------------------------

void write_draws(const std::string& path, const PosteriorDraws& draws,
                 std::uint64_t config_hash);
PosteriorDraws read_draws(const std::string& path);

// --- config files -------------------------------------------------------------

struct FitConfig {
  std::string data_path;
  std::string outcome;
  std::string exposure;
  std::vector<std::string> instruments;
  std::vector<std::string> covariates;
  ModelSpec spec;
  McmcConfig mcmc;
  EvalGrid grid;
  std::string output_dir = ".";
};

// Strict parsers: unknown keys are an error listing the offenders.
FitConfig parse_fit_config(const nlohmann::json& j);
StudyConfig parse_study_config(const nlohmann::json& j);

// hash of the canonical (key-sorted) dump, for provenance stamping
std::uint64_t config_hash(const nlohmann::json& j);

}  // namespace ivbart
