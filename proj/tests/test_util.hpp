#pragma once

#include <armadillo>
#include <functional>
#include <vector>

#include "daymax/gibbs.hpp"
#include "daymax/synthgen.hpp"
#include "daymax/types.hpp"

namespace testutil {

using namespace daymax;

inline std::vector<SiteMeta> spread_sites(int n, double span_km = 120.0,
                                          double elev_lo = 300.0,
                                          double elev_hi = 1500.0) {
  std::vector<SiteMeta> sites;
  for (int i = 0; i < n; ++i) {
    SiteMeta s;
    s.id = "s" + std::to_string(i);
    // Deterministic scatter, no collinearity.
    s.x = span_km * (i % 3) / 2.0 + 7.0 * i;
    s.y = span_km * ((i * 2) % 5) / 4.0 + 3.0 * ((i * i) % 7);
    s.elev = n > 1 ? elev_lo + (elev_hi - elev_lo) * i / double(n - 1) : elev_lo;
    sites.push_back(s);
  }
  return sites;
}

/// Small complete synthetic panel with mild, generic parameter values.
inline SimulationResult tiny_panel(int I = 3, int T = 4, int L = 6,
                                   std::uint64_t seed = 42) {
  GeneratorSpec spec;
  spec.sites = spread_sites(I);
  spec.T = T;
  spec.L = L;
  spec.seed = seed;
  spec.day_offset = 0;
  spec.fixed = {20.0, 0.1, 3.0, 1.0, -0.003};
  spec.rho_psi = 0.0;
  spec.sig2_lambda = 0.5;
  spec.sig2_eta = 0.1;
  spec.z_rho_mean = 1.0;
  spec.z_sig2_mean = std::log(3.0);
  spec.gp_beta0.sig2 = 1.0;
  spec.gp_alpha.sig2 = 0.01;
  spec.gp_z_rho.sig2 = 0.08;
  spec.gp_z_sig2.sig2 = 0.08;
  return simulate_panel(spec);
}

/// Brute-force conditional of one coordinate of a joint Gaussian given all
/// the others, from the explicit (mean, covariance) of the joint.
inline GaussianMoments conditional_from_joint(const arma::vec& mean,
                                              const arma::mat& cov, arma::uword which,
                                              const arma::vec& others) {
  const arma::uword n = mean.n_elem;
  arma::uvec rest(n - 1);
  arma::uword k = 0;
  for (arma::uword j = 0; j < n; ++j) {
    if (j != which) rest[k++] = j;
  }
  const arma::mat S22 = cov.submat(rest, rest);
  const arma::rowvec S12 = cov.row(which).cols(0, n - 1);
  arma::vec s12(n - 1);
  for (arma::uword j = 0; j < n - 1; ++j) s12[j] = cov(which, rest[j]);
  const arma::vec w = arma::solve(S22, s12);
  GaussianMoments g;
  g.mean = mean[which] + arma::dot(w, others - mean.elem(rest));
  g.var = cov(which, which) - arma::dot(w, s12);
  return g;
}

/// Log-density ratio of the full joint at two values of one coordinate,
/// with the residual cache rebuilt for each evaluation.
inline double joint_log_ratio(const GibbsSampler& sampler, const ModelState& base,
                              const std::function<void(ModelState&, double)>& set,
                              double x1, double x2) {
  ModelState s1 = base;
  set(s1, x1);
  ResidualWorkspace w1 = sampler.make_workspace(s1);
  ModelState s2 = base;
  set(s2, x2);
  ResidualWorkspace w2 = sampler.make_workspace(s2);
  return sampler.log_joint(s1, w1) - sampler.log_joint(s2, w2);
}

inline double gaussian_log_ratio(const GaussianMoments& g, double x1, double x2) {
  return normal_logpdf(x1, g.mean, g.var) - normal_logpdf(x2, g.mean, g.var);
}

inline double invgamma_log_ratio(const GammaMoments& g, double x1, double x2) {
  auto logpdf = [&](double x) {
    return g.shape * std::log(g.rate) - std::lgamma(g.shape) -
           (g.shape + 1.0) * std::log(x) - g.rate / x;
  };
  return logpdf(x1) - logpdf(x2);
}

}  // namespace testutil
