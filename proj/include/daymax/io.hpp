#pragma once

#include <map>
#include <string>
#include <vector>

#include "daymax/diagnostics.hpp"
#include "daymax/gibbs.hpp"
#include "daymax/metrics.hpp"
#include "daymax/predictor.hpp"
#include "daymax/synthgen.hpp"
#include "daymax/types.hpp"

namespace daymax {

// ---------------------------------------------------------------------------
// station and observation files
// ---------------------------------------------------------------------------

/// `id,x_km,y_km,elev_m`, or `id,lon,lat,elev_m` with lonlat=true (projected
/// onto a local equirectangular plane in km at ingest).
std::vector<SiteMeta> read_sites_csv(const std::string& path, bool lonlat = false);
void write_sites_csv(const std::string& path, const std::vector<SiteMeta>& sites);

struct IngestReport {
  long rows = 0;
  long skipped_out_of_window = 0;
  std::map<std::string, long> per_site_observed;
};

/// Observations `site_id,date,tmax_c` with ISO dates, filtered to the
/// May-September window (first days_per_year days of it).
PanelDataset ingest(const std::string& sites_path, const std::string& obs_path,
                    int days_per_year = 153, bool lonlat = false,
                    IngestReport* report = nullptr);

/// Writes the panel back out as observation rows; missing cells get no row.
void write_obs_csv(const std::string& path, const PanelDataset& data);

/// Day-of-window (1-based) to calendar month/day within May-September.
void window_day_to_month_day(int l, int* month, int* day);
int month_day_to_window_day(int month, int day);  // -1 outside the window

// ---------------------------------------------------------------------------
// fit artifacts
// ---------------------------------------------------------------------------

/// Long format `chain,iter,param,value`, one row per retained draw.
void write_draws_csv(const std::string& path, const std::vector<ChainOutput>& chains);
std::vector<ChainOutput> read_draws_csv(const std::string& path, const FitMeta& meta,
                                        const FitOptions& opts);

void write_meta_json(const std::string& path, const std::vector<ChainOutput>& chains,
                     const ChainConfig& cfg, int n_chains);
/// Returns meta plus the FitOptions needed to rebuild the parameter layout.
std::pair<FitMeta, FitOptions> read_meta_json(const std::string& path,
                                              ChainConfig* cfg = nullptr,
                                              int* n_chains = nullptr);

struct SummaryEntry {
  std::string name;
  arma::vec draws;  // merged across chains, back-transformed units
};

/// Reported quantities in the summary layout: fixed effects in original
/// units, process means on their natural scales (rho in (-1,1), scale
/// parameters as standard deviations), then per-site fields and psi.
std::vector<SummaryEntry> summary_entries(const std::vector<ChainOutput>& chains);

/// Posterior mean and 5th/95th percentiles per reported parameter, in the
/// model-summary layout (back-transformed units, natural scales).
void write_summary_json(const std::string& path, const std::vector<ChainOutput>& chains);

void write_diagnostics_json(const std::string& path, const DiagnosticsReport& report);

/// Writes <prefix>_draws.csv and <prefix>_meta.json.
void save_fit(const std::string& prefix, const std::vector<ChainOutput>& chains,
              const ChainConfig& cfg, int n_chains);
/// Restores chains (draws, metadata, acceptance) from a saved fit.
std::vector<ChainOutput> load_fit(const std::string& prefix);

// ---------------------------------------------------------------------------
// prediction and score tables
// ---------------------------------------------------------------------------

/// `year,day,mean,q05,q95` per predicted cell (calendar years).
void write_predictive_csv(const std::string& path, const PredictiveSamples& pred,
                          int first_year);
/// `year,day,rep,value` long-format replicates.
void write_replicates_csv(const std::string& path, const PredictiveSamples& pred,
                          int first_year);
PredictiveSamples read_replicates_csv(const std::string& path, int first_year);

/// `variant,site,rmse,mae,crps,cvg` with one `mean` row per variant.
void write_scores_csv(const std::string& path, const LoocvResult& result);
void write_scores_json(const std::string& path, const LoocvResult& result);

/// `param,mean,q05,q95` (the summary schema as CSV).
void write_param_summary_csv(const std::string& path,
                             const std::vector<ChainOutput>& chains);

// ---------------------------------------------------------------------------
// run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  int chains = 10;
  long iterations = 200000;
  long burn_in = 100000;
  long thin = 100;
  std::uint64_t seed = 1;
  std::string variant = "M4";
  int day_offset = 120;
  std::string phi_mode = "fixed";  // fixed | grid:<n>
  double phi_fixed = 0.0;
  bool pin_rho_psi = true;
  bool include_elevation = true;
  std::string scaling = "standardize";  // standardize | center | none
  int days_per_year = 153;
  int jobs = 0;
  bool drop_incomplete_years = false;
  bool lonlat = false;
  HyperPriors priors;

  FitOptions fit_options() const;
  ChainConfig chain_config() const;
};

/// Flat `key = value` configuration file; keys mirror the CLI flags and
/// `prior.*` entries override hyperprior values.
void apply_config_file(RunConfig& cfg, const std::string& path);
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

// ---------------------------------------------------------------------------
// simulation specs
// ---------------------------------------------------------------------------

GeneratorSpec read_generator_spec(const std::string& path);
void write_truth_json(const std::string& path, const SimulationResult& sim);

/// Formats a double with enough digits to round-trip exactly.
std::string format_double(double v);

}  // namespace daymax
