#pragma once

#include <string>
#include <vector>

#include "daymax/predictor.hpp"
#include "daymax/types.hpp"

namespace daymax {

struct SiteScore {
  std::string site_id;
  double rmse = 0.0;
  double mae = 0.0;
  double crps = 0.0;
  double cvg = 0.0;
  long cells = 0;
};

/// Ensemble CRPS of one cell, literal double-sum form (reference kernel).
double crps_cell_reference(const arma::vec& reps, double truth);

/// Same quantity via the sorted-sample identity, O(B log B).
double crps_cell(const arma::vec& reps, double truth);

/// RMSE/MAE/CRPS/CVG over days l >= 2 with non-missing truth.
SiteScore score_site(const PredictiveSamples& pred, const PanelDataset& truth,
                     int site_index, bool parallel = true);

struct LoocvRow {
  std::string variant;
  std::string site;
  double rmse = 0.0, mae = 0.0, crps = 0.0, cvg = 0.0;
  bool failed = false;
  std::string error;
};

struct LoocvConfig {
  ChainConfig chain_cfg;
  int n_chains = 2;
  long B = 0;  // replicates per prediction; 0 -> all draws
  FitOptions base_opts;
};

struct LoocvResult {
  std::vector<LoocvRow> rows;        // per (variant, site)
  std::vector<LoocvRow> mean_rows;   // per variant, site = "mean"
};

/// Refits each variant once per held-out site and scores the withheld
/// series; per-site failures are recorded, not fatal.
LoocvResult run_loocv(const PanelDataset& data, const HyperPriors& priors,
                      const std::vector<ModelVariant>& variants, const LoocvConfig& cfg);

/// The canonical nine-variant lattice, from no spatial processes to all four.
std::vector<ModelVariant> loocv_default_variants();

struct ChangeSummary {
  double delta_mean = 0.0;  // mean(window2) - mean(window1)
  double q_sd = 1.0;        // sd(window2) / sd(window1)
  arma::vec delta_draws;    // per-replicate differences (predictive input only)
  double prob_positive = 0.0;
};

/// Between-window change for one observed series; windows are 1-based
/// inclusive year ranges.
ChangeSummary change_summary(const PanelDataset& data, int site_index, int w1_begin,
                             int w1_end, int w2_begin, int w2_end);

/// Posterior change distribution from predictive replicates.
ChangeSummary change_summary(const PredictiveSamples& pred, int w1_begin, int w1_end,
                             int w2_begin, int w2_end);

}  // namespace daymax
