#pragma once

#include <armadillo>
#include <string>
#include <vector>

#include "daymax/gibbs.hpp"

namespace daymax {

/// Potential scale reduction factor over M >= 2 chains of equal length.
/// Returns +inf when all chains are constant at different levels, 1 when
/// they are constant and identical.
double rhat(const std::vector<arma::vec>& chains);

/// Multi-chain effective sample size from the pooled autocorrelation
/// sequence with initial-monotone truncation.  A constant chain returns 1.
double ess(const std::vector<arma::vec>& chains);

struct ThinnedViews {
  std::vector<std::size_t> rhat_indices;      // per chain
  std::vector<std::size_t> inference_indices;
  long rhat_stride = 1;
  long inference_stride = 1;
};

struct ThinTargets {
  long rhat_per_chain = 1000;
  long inference_per_chain = 100;
};

/// Deterministic stride thinning to the two per-chain target counts.
ThinnedViews thin_protocol(const std::vector<ChainOutput>& chains, ThinTargets targets);

struct ParamDiagnostic {
  std::string name;
  double rhat = 1.0;
  double ess = 0.0;
  double mean = 0.0;
};

struct DiagnosticsReport {
  std::vector<ParamDiagnostic> params;
  AcceptanceReport acceptance;  // pooled across chains
  long chains = 0;
  long draws_per_chain = 0;
  long thin = 1;
  double max_rhat = 0.0;
  double min_ess = 0.0;
};

DiagnosticsReport build_report(const std::vector<ChainOutput>& chains);

/// Stationary space-time covariance of the yearly random-effect surface:
/// cov(gamma_t(s), gamma_{t+h}(s')) for the time covariates u = tcov(t) and
/// v = tcov(t+h) at site distance d, excluding the same-site same-year pure
/// error term.
double equilibrium_covariance(double sig2_beta0, double phi_beta0, double sig2_alpha,
                              double phi_alpha, double sig2_lambda, double rho_psi,
                              double d, double u, double v, int h);

}  // namespace daymax
