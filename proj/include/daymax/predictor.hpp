#pragma once

#include <armadillo>
#include <map>
#include <vector>

#include "daymax/gibbs.hpp"
#include "daymax/rng.hpp"
#include "daymax/types.hpp"

namespace daymax {

/// Type-7 (linear interpolation) empirical quantile.
double quantile_type7(arma::vec x, double p);

/// Derives a per-replicate seed; replicates are independent streams so the
/// composition loop parallelizes without changing results.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct PredictiveCell {
  int t = 0;  // 0-based year
  int l = 0;  // 0-based day
};

// B posterior-predictive replicates on a set of (year, day) cells, with
// 90% interval extraction from the 5th/95th empirical percentiles.
struct PredictiveSamples {
  SiteMeta site;
  int T = 0, L = 0;
  std::vector<PredictiveCell> cells;
  arma::mat replicates;  // B x cells.size()

  long B() const { return static_cast<long>(replicates.n_rows); }
  arma::vec cell_mean() const;
  arma::vec cell_lower() const;  // 5th percentile
  arma::vec cell_upper() const;  // 95th percentile
};

// Rebuilds the design a fit used, from its stored metadata.
Design design_from_meta(const FitMeta& meta);

// Conditional weights for one target point under a fixed decay; reusable
// across posterior draws because the correlation structure does not depend
// on the draw's variance or mean.
class FieldKriger {
 public:
  FieldKriger(const std::vector<SiteMeta>& sites, double x, double y, double phi);

  int coincident_index() const { return coincident_; }
  GaussianMoments conditional(const arma::vec& w, double mean, double sig2) const;

 private:
  arma::vec k_;
  double c_ = 0.0;
  double sum_k_ = 0.0;
  int coincident_ = -1;
};

struct PredictOptions {
  long B = 0;  // 0 -> all retained draws
  std::uint64_t seed = 1;
  bool parallel = true;
};

long total_draws(const std::vector<ChainOutput>& chains);

/// Per-draw Bayesian kriging of one field at a new point.  For the latent
/// z fields the returned draws are on the natural scale (rho in (-1,1),
/// sigma^2 > 0).  At an observed site the stored values are reproduced.
arma::vec krige_field_draw(const std::vector<ChainOutput>& chains, Field which,
                           const SiteMeta& s0, const PredictOptions& opts);

/// Ordinary kriging of the day-1 value of year t (1-based) at (x, y):
/// exponential covariance with decay 3/d_max and the year's empirical sill.
double seed_day1(const PanelDataset& data, int year_t, double x, double y);

/// Composition sampling of one year's series through day l' (1-based).
PredictiveSamples compose_series(const std::vector<ChainOutput>& chains,
                                 const SiteMeta& s0, int year_t, int through_day,
                                 const PanelDataset& data, const PredictOptions& opts);

/// Composition sampling of the full (t, l) panel at a new site.
PredictiveSamples predict_panel(const std::vector<ChainOutput>& chains,
                                const SiteMeta& s0, const PanelDataset& data,
                                const PredictOptions& opts);

/// Replicates restricted to the missing cells of an observed-with-gaps
/// series; each gap is seeded from the last observed value before it.
PredictiveSamples impute_missing(const std::vector<ChainOutput>& chains,
                                 const PanelDataset& data, int site_index,
                                 const PredictOptions& opts);

}  // namespace daymax
