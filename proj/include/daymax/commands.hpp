#pragma once

#include <string>
#include <vector>

#include "daymax/io.hpp"

namespace daymax {

// Subcommand bodies shared by the command-line tool and the test suites.
// Diagnostics go to stderr; data goes to the named files.  Each returns a
// process exit code (0 success, 1 runtime failure).

struct FitArgs {
  std::string sites_path, obs_path, out_prefix;
  RunConfig cfg;
};
int cmd_fit(const FitArgs& args);

struct PredictArgs {
  std::string fit_prefix, sites_path, obs_path, out_path, replicates_path;
  double x = 0.0, y = 0.0, elev = 0.0;
  std::string site_id;  // alternative to explicit coordinates
  int year = 0;         // calendar year; 0 -> all years
  int through_day = 0;  // 0 -> full season
  long samples = 0;
  std::uint64_t seed = 1;
  int days_per_year = 153;
  bool lonlat = false;
  int jobs = 0;
};
int cmd_predict(const PredictArgs& args);

struct ImputeArgs {
  std::string fit_prefix, sites_path, obs_path, site_id, out_path, replicates_path;
  long samples = 0;
  std::uint64_t seed = 1;
  int days_per_year = 153;
  bool lonlat = false;
  int jobs = 0;
};
int cmd_impute(const ImputeArgs& args);

struct LoocvArgs {
  std::string sites_path, obs_path, out_prefix;
  std::vector<std::string> variants;  // empty -> the nine-variant lattice
  long samples = 0;
  RunConfig cfg;
};
int cmd_loocv(const LoocvArgs& args);

struct DiagnoseArgs {
  std::string fit_prefix, out_path;
  int jobs = 0;
};
int cmd_diagnose(const DiagnoseArgs& args);

struct SimulateArgs {
  std::string spec_path, out_prefix;
};
int cmd_simulate(const SimulateArgs& args);

struct LocalFitArgs {
  std::string sites_path, obs_path, site_id, out_path;
  RunConfig cfg;
};
int cmd_local_fit(const LocalFitArgs& args);

struct ChangeSummaryArgs {
  std::string sites_path, obs_path, out_path;
  std::string replicates_path;  // predictive mode when set
  std::string window1, window2;  // "YYYY:YYYY"
  int days_per_year = 153;
  bool lonlat = false;
};
int cmd_change_summary(const ChangeSummaryArgs& args);

}  // namespace daymax
