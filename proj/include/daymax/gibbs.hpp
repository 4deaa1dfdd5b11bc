#pragma once

#include <armadillo>
#include <span>
#include <string>
#include <vector>

#include "daymax/rng.hpp"
#include "daymax/spatial.hpp"
#include "daymax/types.hpp"

namespace daymax {

enum class Field { Beta0, Alpha, ZRho, ZSig2 };
enum class Coef { Beta1, Beta2, Beta3 };
enum class Var { Lambda, Eta, Beta0, Alpha, ZRho, ZSig2 };

/// Precision-weighted product of Gaussian densities.
GaussianMoments combine_normals(std::span<const GaussianMoments> terms);

struct TruncGaussian {
  double mean = 0.0;
  double var = 1.0;
  double lower = -1.0;
  double upper = 1.0;
  bool informative = true;  // false when the data sum vanishes
};

struct GammaMoments {
  double shape = 1.0;
  double rate = 1.0;
};

// Cached residuals X_{tli} = Y_{tli} - (seasonal/elevation mean + gamma_{ti});
// the sampler keeps it consistent incrementally across updates.
struct ResidualWorkspace {
  int T = 0, L = 0, I = 0;
  arma::vec X;

  double x(int t, int l, int i) const {
    return X[(static_cast<std::size_t>(t) * L + l) * I + i];
  }
  double& x(int t, int l, int i) {
    return X[(static_cast<std::size_t>(t) * L + l) * I + i];
  }
  void recompute(const PanelDataset& data, const Design& design, const ModelState& s);
};

// Random-walk proposal scales for the two latent-field families, with
// window-based multiplicative adaptation during burn-in only.
struct MhTuner {
  int window = 100;
  bool adapting = true;
  arma::vec sd_z_rho, sd_z_sig2;  // one slot per site, or one pooled slot
  arma::uvec win_acc_rho, win_try_rho, win_acc_sig, win_try_sig;
  arma::uvec post_acc_rho, post_try_rho, post_acc_sig, post_try_sig;

  void count_rho(std::size_t slot, bool accepted);
  void count_sig(std::size_t slot, bool accepted);
  /// Applies the +-10% rule per slot and clears the window counters.
  void adapt();
  /// Ends adaptation; subsequent draws come from a fixed kernel.
  void freeze();
};

struct AcceptanceReport {
  arma::vec rate_z_rho, rate_z_sig2;  // per slot, post burn-in
  double overall_z_rho = 0.0, overall_z_sig2 = 0.0;
  long counted_iterations = 0;
};

// Name/offset map of the stored parameter vector for one model variant.
struct ParamLayout {
  int T = 0, I = 0;
  std::vector<std::string> names;
  int beta0 = -1, alpha = -1, beta1 = -1, beta2 = -1, beta3 = -1;
  int z_rho_mean = -1, z_sig2_mean = -1, rho_psi = -1;
  int sig2_lambda = -1, sig2_eta = -1;
  int sig2_beta0 = -1, sig2_alpha = -1, sig2_z_rho = -1, sig2_z_sig2 = -1;
  int phi_beta0 = -1, phi_alpha = -1, phi_z_rho = -1, phi_z_sig2 = -1;
  int beta0_tilde = -1, alpha_tilde = -1, z_rho = -1, z_sig2 = -1;  // block starts
  int psi = -1;    // block start, T-1 entries (psi_1 is pinned)
  int gamma = -1;  // block start, T*I entries, year-major

  int size() const { return static_cast<int>(names.size()); }
  int find(const std::string& name) const;

  static ParamLayout create(const ModelVariant& variant, const FitOptions& opts, int T,
                            int I, const std::vector<std::string>& site_ids);
};

// Everything about a fit another process needs to predict or diagnose.
struct FitMeta {
  std::vector<SiteMeta> sites;
  int T = 0, L = 0;
  int first_year = 1;
  ModelVariant variant;
  bool pin_rho_psi_zero = true;
  bool include_elevation = true;
  ScalingPolicy scaling_policy = ScalingPolicy::Standardize;
  int day_offset = 120;
  CovariateScaling scaling;
  PhiMode phi_mode = PhiMode::Fixed;
  double phi_fixed = 0.0;
  std::vector<double> phi_grid;
  bool rescaled = false;
};

struct ChainOutput {
  ParamLayout layout;
  arma::mat draws;  // n_draws x layout.size()
  std::vector<long> iteration_numbers;
  AcceptanceReport acceptance;
  std::uint64_t seed = 0;
  long iterations = 0, burn_in = 0, thin = 1;
  FitMeta meta;

  long n_draws() const { return static_cast<long>(draws.n_rows); }
  double value(long draw, int param) const { return draws(draw, param); }
  /// Reconstructs the full model state stored in one draw.
  ModelState state_at(long draw) const;
};

// Metropolis-within-Gibbs sampler for the space-time model; immutable over
// (data, design, priors, options) so one instance can drive many chains.
class GibbsSampler {
 public:
  GibbsSampler(const PanelDataset& data, const Design& design, const HyperPriors& priors,
               const FitOptions& opts);

  ModelState initial_state() const;
  ResidualWorkspace make_workspace(const ModelState& s) const;
  MhTuner make_tuner() const;

  void update_global_means(ModelState& s, ResidualWorkspace& ws, MhTuner& tuner,
                           Rng& rng) const;
  void update_rho_psi(ModelState& s, Rng& rng) const;
  void update_variances(ModelState& s, Rng& rng) const;
  void update_phi_discrete(ModelState& s, Rng& rng) const;
  void update_site_gaussian_fields(ModelState& s, Rng& rng) const;
  void update_site_latents_mh(ModelState& s, ResidualWorkspace& ws, MhTuner& tuner,
                              Rng& rng) const;
  void update_psi(ModelState& s, Rng& rng) const;
  void update_gamma(ModelState& s, ResidualWorkspace& ws, Rng& rng) const;
  void gibbs_sweep(ModelState& s, ResidualWorkspace& ws, MhTuner& tuner, Rng& rng) const;

  // Full-conditional parameters.  The update kernels draw from these, and the
  // correctness suite checks them against log_joint density ratios.
  GaussianMoments fc_fixed_effect(Coef which, const ModelState& s,
                                  const ResidualWorkspace& ws) const;
  GaussianMoments fc_global_mean(Field which, const ModelState& s) const;
  TruncGaussian fc_rho_psi(const ModelState& s) const;
  GammaMoments fc_precision(Var which, const ModelState& s) const;
  GaussianMoments fc_site_field(Field which, int i, const ModelState& s) const;
  GaussianMoments fc_psi(int t, const ModelState& s) const;
  GaussianMoments fc_gamma(int t, int i, const ModelState& s,
                           const ResidualWorkspace& ws) const;
  double mh_logtarget_site(Field which, int i, double z, const ModelState& s,
                           const ResidualWorkspace& ws) const;
  double mh_logtarget_global(Field which, double z, const ModelState& s,
                             const ResidualWorkspace& ws) const;
  std::vector<double> phi_logweights(Field which, const ModelState& s) const;

  /// Log density of (data, process, parameters) under the full hierarchy.
  double log_joint(const ModelState& s, const ResidualWorkspace& ws) const;

  const CorrelationMatrix& corr(Field which, const ModelState& s) const;
  const Design& design() const { return design_; }
  const PanelDataset& data() const { return data_; }
  const HyperPriors& priors() const { return priors_; }
  const FitOptions& options() const { return opts_; }
  double phi_fixed_value() const { return phi_fixed_; }
  const std::vector<double>& phi_grid() const { return phi_grid_; }

 private:
  const PanelDataset& data_;
  Design design_;
  HyperPriors priors_;
  FitOptions opts_;
  double phi_fixed_ = 0.0;
  std::vector<double> phi_grid_;
  CorrelationMatrix corr_fixed_;
  std::vector<CorrelationMatrix> corr_grid_;

  GaussianMoments gp_conditional(const arma::vec& field, double mean, double sig2,
                                 const CorrelationMatrix& R, int i) const;
  double site_ar_ss(int i, double rho, const ResidualWorkspace& ws) const;
};

/// Affine back-transform of the draws to the original covariate units
/// (trend per year, harmonics unscaled, elevation per meter, intercepts at
/// zero covariates).  Sets the rescaled marker; rescaling twice throws.
ChainOutput rescale_posterior(const ChainOutput& chain);

ChainOutput run_chain(const PanelDataset& data, const HyperPriors& priors,
                      const FitOptions& opts, const ChainConfig& cfg);

/// Independent chains, base seed XOR chain index; parallel across chains.
std::vector<ChainOutput> fit_chains(const PanelDataset& data, const HyperPriors& priors,
                                    const FitOptions& opts, const ChainConfig& cfg,
                                    int n_chains);

}  // namespace daymax
