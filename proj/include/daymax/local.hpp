#pragma once

#include <string>
#include <vector>

#include "daymax/gibbs.hpp"

namespace daymax {

/// Independent single-site fit: the spatial model degenerated to I = 1 with
/// all Gaussian processes disabled, unscaled covariates and no elevation
/// term (a lone site cannot identify it).
std::vector<ChainOutput> fit_local(const PanelDataset& data, int site_index,
                                   const HyperPriors& priors, const ChainConfig& cfg,
                                   int n_chains, int day_offset = 120);

/// FitOptions used by fit_local, exposed so the degeneration is testable.
FitOptions local_fit_options(int day_offset = 120);

struct OverlapRow {
  std::string site;
  double alpha = 0.0;      // interval overlap for the yearly trend
  double rho = 0.0;        // daily autocorrelation
  double sigma_eps = 0.0;  // daily error scale
};

/// Jaccard overlap of the 90% credible intervals between per-site local
/// fits and the corresponding site-level posteriors of a joint fit.  The
/// intercept is excluded: the joint model moves elevation into the fixed
/// effects, so the two intercepts measure different things.
std::vector<OverlapRow> compare_local_vs_full(
    const std::vector<std::vector<ChainOutput>>& local_fits,
    const std::vector<std::string>& local_site_ids,
    const std::vector<ChainOutput>& full);

/// |a intersect b| / |a union b| for two intervals.
double interval_overlap(double a_lo, double a_hi, double b_lo, double b_hi);

}  // namespace daymax
