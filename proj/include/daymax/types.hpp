#pragma once

#include <armadillo>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace daymax {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct SingularityError : NumericError {
  using NumericError::NumericError;
};

struct SiteMeta {
  std::string id;
  double x = 0.0;  // projected planar km
  double y = 0.0;
  double elev = 0.0;  // meters
};

inline double site_distance(const SiteMeta& a, const SiteMeta& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Panel of daily values, year-major: cell (t, l, i) at (t*L + l)*I + i.
// A cell with miss == 1 carries no value.
struct PanelDataset {
  std::vector<SiteMeta> sites;
  int T = 0;  // years
  int L = 0;  // days per year
  int first_year = 1;
  std::vector<double> values;
  std::vector<std::uint8_t> miss;

  int I() const { return static_cast<int>(sites.size()); }
  std::size_t idx(int t, int l, int i) const {
    return (static_cast<std::size_t>(t) * L + l) * sites.size() + i;
  }
  double value(int t, int l, int i) const { return values[idx(t, l, i)]; }
  bool missing(int t, int l, int i) const { return miss[idx(t, l, i)] != 0; }

  void validate() const;
  /// True when every (t, i) series is fully observed and day 1 is present.
  bool fit_ready() const;
  /// Drops every year in which any site has a missing day.
  PanelDataset drop_incomplete_years() const;
  PanelDataset drop_site(int i) const;
  int site_index(const std::string& id) const;
};

enum class ScalingPolicy { Standardize, CenterOnly, None };

struct CovariateScaling {
  double t_center = 0.0, t_scale = 1.0;
  double sin_center = 0.0, sin_scale = 1.0;
  double cos_center = 0.0, cos_scale = 1.0;
  double elev_center = 0.0, elev_scale = 1.0;
};

// Harmonic basis and centered/scaled covariates shared by the sampler,
// the simulator and the predictor.
struct Design {
  int T = 0, L = 0;
  int day_offset = 0;
  ScalingPolicy policy = ScalingPolicy::Standardize;
  bool include_elevation = true;
  CovariateScaling scaling;
  arma::vec sin_raw, cos_raw;  // length L, harmonic at (l + offset)/365
  arma::vec tc;                // length T, scaled year covariate
  arma::vec sc, cc;            // length L, scaled harmonics
  arma::vec ec;                // length I, scaled elevations

  double elev_scaled(double elev_m) const {
    return (elev_m - scaling.elev_center) / scaling.elev_scale;
  }
};

struct FixedEffects;

/// Seasonal/elevation part of the mean; the intercept and trend live in the
/// hierarchically centered site effects.
double seasonal_mean(const Design& d, const FixedEffects& f, int l, double elev_scaled);

Design build_design(int T, int L, const std::vector<SiteMeta>& sites,
                    ScalingPolicy policy, int day_offset = 120,
                    bool include_elevation = true);
Design build_design(const PanelDataset& data, ScalingPolicy policy,
                    int day_offset = 120, bool include_elevation = true);

struct FixedEffects {
  double beta0 = 0.0;  // global site-intercept mean
  double alpha = 0.0;  // global trend mean
  double beta1 = 0.0;  // sin coefficient
  double beta2 = 0.0;  // cos coefficient
  double beta3 = 0.0;  // elevation coefficient
};

// Site-level processes, hierarchically centered: beta0_tilde(s) has mean
// beta0, alpha_tilde(s) has mean alpha.  z_rho and z_sig2 are the latent
// Gaussian fields for the autocorrelation and the daily error variance.
struct SiteLatents {
  arma::vec beta0_tilde;
  arma::vec alpha_tilde;
  arma::vec z_rho;
  arma::vec z_sig2;

  double rho(int i) const { return std::tanh(0.5 * z_rho[i]); }
  double sig2(int i) const { return std::exp(z_sig2[i]); }
};

struct TemporalEffects {
  arma::vec psi;    // length T, psi[0] pinned to 0
  arma::mat gamma;  // T x I
};

struct HyperState {
  double rho_psi = 0.0;
  double sig2_lambda = 1.0;
  double sig2_eta = 1.0;
  double sig2_beta0 = 1.0;
  double sig2_alpha = 1.0;
  double sig2_z_rho = 1.0;
  double sig2_z_sig2 = 1.0;
  double z_rho_mean = 0.0;   // global mean of the z_rho field
  double z_sig2_mean = 0.0;  // global mean of the z_sig2 field
  double phi_beta0 = 1.0, phi_alpha = 1.0, phi_z_rho = 1.0, phi_z_sig2 = 1.0;
  // Grid indices when decays are sampled over a discrete support (-1 = fixed).
  int phi_idx_beta0 = -1, phi_idx_alpha = -1, phi_idx_z_rho = -1, phi_idx_z_sig2 = -1;
};

struct ModelState {
  FixedEffects fixed;
  SiteLatents site;
  TemporalEffects temporal;
  HyperState hyper;

  bool finite() const;
};

struct GaussianPrior {
  double mean = 0.0;
  double sd = 100.0;
};

struct InvGammaPrior {
  double a = 2.0;
  double b = 1.0;
  double mean() const { return a > 1.0 ? b / (a - 1.0) : b; }
};

struct HyperPriors {
  GaussianPrior beta0, alpha, beta1, beta2, beta3;
  GaussianPrior z_rho_mean;           // sd 100 by default
  GaussianPrior z_sig2_mean{0.0, 1.0};
  InvGammaPrior sig2_lambda, sig2_eta, sig2_beta0, sig2_alpha, sig2_z_rho, sig2_z_sig2;
  double rho_psi_lower = -1.0;
  double rho_psi_upper = 1.0;
  // Optional explicit decay support; when empty a default grid is derived
  // from the station geometry in grid mode.
  std::vector<double> phi_grid;

  void validate() const;
};

// Which of the four site-level Gaussian processes are in the model.  A
// disabled process collapses its field to the corresponding global value.
struct ModelVariant {
  bool gp_beta0 = true;
  bool gp_alpha = true;
  bool gp_z_rho = true;
  bool gp_z_sig2 = true;

  int n_processes() const {
    return int(gp_beta0) + int(gp_alpha) + int(gp_z_rho) + int(gp_z_sig2);
  }
  static ModelVariant none() { return {false, false, false, false}; }
  static ModelVariant all() { return {true, true, true, true}; }
  /// Parses "M0", "M4", "M1:beta0", "M3:beta0,alpha,sigma", ...
  static ModelVariant parse(const std::string& text);
  std::string to_string() const;
};

enum class PhiMode { Fixed, Grid };

// Everything the sampler needs besides data and priors.
struct FitOptions {
  ModelVariant variant = ModelVariant::all();
  bool pin_rho_psi_zero = true;
  bool include_elevation = true;
  ScalingPolicy scaling = ScalingPolicy::Standardize;
  int day_offset = 120;
  PhiMode phi_mode = PhiMode::Fixed;
  double phi_fixed = 0.0;  // 0 -> 3 / max pairwise distance
  int phi_grid_n = 10;
  // Random-walk proposal tuning.  The starting scale adapts to the panel
  // size; mh_initial_sd caps it.
  double mh_initial_sd = 0.5;
  int mh_window = 100;
  bool mh_adapt = true;
};

struct ChainConfig {
  long iterations = 200000;
  long burn_in = 100000;
  long thin = 100;
  std::uint64_t seed = 1;
};

}  // namespace daymax
