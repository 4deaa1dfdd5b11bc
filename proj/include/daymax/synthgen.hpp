#pragma once

#include "daymax/gibbs.hpp"
#include "daymax/rng.hpp"
#include "daymax/spatial.hpp"
#include "daymax/types.hpp"

namespace daymax {

struct GpFieldSpec {
  bool include = true;
  double sig2 = 1.0;
  double phi = 0.0;            // 0 -> 3 / d_max
  std::vector<double> values;  // optional explicit field values (skip the draw)
};

// Ground-truth parameterization of the forward model.  Fixed effects are in
// the units of the covariates actually used: raw year/harmonic/elevation, or
// centered versions when centered_covariates is set.
struct GeneratorSpec {
  std::vector<SiteMeta> sites;
  int T = 10;
  int L = 30;
  int day_offset = 0;
  int first_year = 1;
  bool centered_covariates = false;
  std::uint64_t seed = 1;

  FixedEffects fixed;
  double rho_psi = 0.0;
  double sig2_lambda = 1.0;
  double sig2_eta = 0.04;
  double z_rho_mean = 0.0;
  double z_sig2_mean = 0.0;
  GpFieldSpec gp_beta0, gp_alpha, gp_z_rho, gp_z_sig2;

  Design make_design() const {
    return build_design(T, L, sites,
                        centered_covariates ? ScalingPolicy::CenterOnly
                                            : ScalingPolicy::None,
                        day_offset, true);
  }
};

struct SimulationResult {
  PanelDataset panel;
  ModelState truth;
  Design design;
};

struct RandomEffects {
  arma::vec beta0_tilde, alpha_tilde, z_rho, z_sig2;
  arma::vec psi;
  arma::mat gamma;  // T x I
};

/// Mean-zero GP draw added to a constant, w ~ N(mean 1, sig2 R).
arma::vec mvn_draw_centered(double mean, double sig2, const CorrelationMatrix& R,
                            Rng& rng);

/// Draws the latent processes of the hierarchy (fields, psi, gamma).
RandomEffects simulate_random_effects(const GeneratorSpec& spec, const Design& design,
                                      Rng& rng);

/// Forward simulation of the full panel plus the generating latent state.
SimulationResult simulate_panel(const GeneratorSpec& spec);

/// Within-year stationary law of the daily autoregression at day 1.
GaussianMoments stationary_day1(const ModelState& s, const Design& design, int t, int i);

/// Equation-consistent prior draw of a complete model state; used by
/// joint-consistency (prior vs successive-conditional) checks.
ModelState draw_state_from_prior(const GibbsSampler& sampler, Rng& rng);

/// Redraws all days l >= 2 conditionally on day 1 and the given state.
void regenerate_days(PanelDataset& data, const Design& design, const ModelState& s,
                     Rng& rng);

}  // namespace daymax
