#include "daymax/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace daymax {

double rhat(const std::vector<arma::vec>& chains) {
  const std::size_t M = chains.size();
  if (M < 2) throw DataError("rhat: needs at least two chains");
  const arma::uword n = chains[0].n_elem;
  if (n < 2) throw DataError("rhat: needs at least two draws per chain");
  for (const auto& c : chains) {
    if (c.n_elem != n) throw DataError("rhat: chains have unequal lengths");
  }
  arma::vec means(M), vars(M);
  for (std::size_t m = 0; m < M; ++m) {
    means[m] = arma::mean(chains[m]);
    vars[m] = arma::var(chains[m]);  // n-1 denominator
  }
  const double W = arma::mean(vars);
  const double B_over_n = arma::var(means);  // = B / n
  if (W <= 0.0) {
    const bool same = arma::all(arma::abs(means - means[0]) == 0.0);
    return same ? 1.0 : std::numeric_limits<double>::infinity();
  }
  const double var_plus = (double(n) - 1.0) / double(n) * W + B_over_n;
  return std::sqrt(var_plus / W);
}

double ess(const std::vector<arma::vec>& chains) {
  const std::size_t M = chains.size();
  if (M < 1) throw DataError("ess: needs at least one chain");
  const arma::uword n = chains[0].n_elem;
  if (n < 4) throw DataError("ess: needs at least four draws per chain");
  for (const auto& c : chains) {
    if (c.n_elem != n) throw DataError("ess: chains have unequal lengths");
  }
  const double total = double(M) * double(n);

  arma::vec means(M), vars(M);
  for (std::size_t m = 0; m < M; ++m) {
    means[m] = arma::mean(chains[m]);
    vars[m] = arma::var(chains[m]);
  }
  const double W = arma::mean(vars);
  const double B_over_n = M >= 2 ? arma::var(means) : 0.0;
  const double var_plus = (double(n) - 1.0) / double(n) * W + B_over_n;
  if (var_plus <= 0.0) return 1.0;

  // Pooled within-chain autocovariances.
  const arma::uword max_lag = n - 1;
  arma::vec acov(max_lag + 1, arma::fill::zeros);
  for (std::size_t m = 0; m < M; ++m) {
    const arma::vec d = chains[m] - means[m];
    for (arma::uword k = 0; k <= max_lag; ++k) {
      double s = 0.0;
      for (arma::uword t = 0; t + k < n; ++t) s += d[t] * d[t + k];
      acov[k] += s / double(n);
    }
  }
  acov /= double(M);

  // rho_k per Gelman et al.; initial monotone positive sequence truncation.
  auto rho = [&](arma::uword k) { return 1.0 - (W - acov[k]) / var_plus; };
  double tau = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (arma::uword k = 0; k + 1 <= max_lag; k += 2) {
    double pair = rho(k) + rho(k + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau - 1.0, 1.0 / (1.0 + 0.05));  // tau >= 1 up to tolerance
  double out = total / tau;
  out = std::min(out, total * 1.05);
  return std::max(out, 1.0);
}

ThinnedViews thin_protocol(const std::vector<ChainOutput>& chains, ThinTargets targets) {
  if (chains.empty()) throw DataError("thin_protocol: no chains");
  const long avail = chains[0].n_draws();
  for (const auto& c : chains) {
    if (c.n_draws() != avail) throw DataError("thin_protocol: unequal chain lengths");
  }
  auto make = [&](long target, long& stride_out) {
    if (target < 1) throw DataError("thin_protocol: target must be >= 1");
    if (avail < target) {
      throw DataError("thin_protocol: have " + std::to_string(avail) +
                      " draws per chain, need at least " + std::to_string(target));
    }
    const long stride = avail / target;
    stride_out = stride;
    std::vector<std::size_t> idx(target);
    for (long k = 0; k < target; ++k) idx[k] = static_cast<std::size_t>(k * stride);
    return idx;
  };
  ThinnedViews v;
  v.rhat_indices = make(targets.rhat_per_chain, v.rhat_stride);
  v.inference_indices = make(targets.inference_per_chain, v.inference_stride);
  return v;
}

DiagnosticsReport build_report(const std::vector<ChainOutput>& chains) {
  if (chains.empty()) throw DataError("build_report: no chains");
  const ParamLayout& lay = chains[0].layout;
  DiagnosticsReport rep;
  rep.chains = static_cast<long>(chains.size());
  rep.draws_per_chain = chains[0].n_draws();
  rep.thin = chains[0].thin;

  const int P = lay.size();
  rep.params.resize(P);
#pragma omp parallel for schedule(dynamic)
  for (int p = 0; p < P; ++p) {
    std::vector<arma::vec> cols;
    cols.reserve(chains.size());
    for (const auto& c : chains) cols.push_back(c.draws.col(p));
    ParamDiagnostic d;
    d.name = lay.names[p];
    double total_mean = 0.0;
    for (const auto& col : cols) total_mean += arma::mean(col);
    d.mean = total_mean / double(cols.size());
    d.rhat = cols.size() >= 2 ? rhat(cols) : std::numeric_limits<double>::quiet_NaN();
    d.ess = ess(cols);
    rep.params[p] = d;
  }
  rep.max_rhat = 0.0;
  rep.min_ess = std::numeric_limits<double>::infinity();
  for (const auto& d : rep.params) {
    if (std::isfinite(d.rhat)) rep.max_rhat = std::max(rep.max_rhat, d.rhat);
    rep.min_ess = std::min(rep.min_ess, d.ess);
  }

  // Pool post burn-in acceptance over chains.
  rep.acceptance = chains[0].acceptance;
  for (std::size_t c = 1; c < chains.size(); ++c) {
    rep.acceptance.rate_z_rho += chains[c].acceptance.rate_z_rho;
    rep.acceptance.rate_z_sig2 += chains[c].acceptance.rate_z_sig2;
    rep.acceptance.overall_z_rho += chains[c].acceptance.overall_z_rho;
    rep.acceptance.overall_z_sig2 += chains[c].acceptance.overall_z_sig2;
  }
  const double nc = double(chains.size());
  rep.acceptance.rate_z_rho /= nc;
  rep.acceptance.rate_z_sig2 /= nc;
  rep.acceptance.overall_z_rho /= nc;
  rep.acceptance.overall_z_sig2 /= nc;
  return rep;
}

double equilibrium_covariance(double sig2_beta0, double phi_beta0, double sig2_alpha,
                              double phi_alpha, double sig2_lambda, double rho_psi,
                              double d, double u, double v, int h) {
  if (!(std::abs(rho_psi) < 1.0)) {
    throw NumericError("equilibrium_covariance: |rho_psi| must be < 1");
  }
  const double cb = sig2_beta0 * std::exp(-phi_beta0 * d);
  const double ca = u * v * sig2_alpha * std::exp(-phi_alpha * d);
  const double cp = sig2_lambda / (1.0 - rho_psi * rho_psi) *
                    std::pow(rho_psi, std::abs(h));
  return cb + ca + cp;
}

}  // namespace daymax
