#include "daymax/synthgen.hpp"

#include <cmath>

namespace daymax {

arma::vec mvn_draw_centered(double mean, double sig2, const CorrelationMatrix& R,
                            Rng& rng) {
  arma::vec z(R.n());
  for (int k = 0; k < R.n(); ++k) z[k] = rng.normal();
  return mean + std::sqrt(sig2) * (R.chol_lower * z);
}

namespace {

arma::vec field_values(const GpFieldSpec& f, double mean,
                       const std::vector<SiteMeta>& sites, Rng& rng) {
  const int I = static_cast<int>(sites.size());
  if (!f.include) return arma::vec(I, arma::fill::value(mean));
  if (!f.values.empty()) {
    if (static_cast<int>(f.values.size()) != I) {
      throw DataError("generator: explicit field length != number of sites");
    }
    return arma::vec(f.values);
  }
  const double phi = f.phi > 0.0 ? f.phi : (I >= 2 ? default_phi(sites) : 1.0);
  const CorrelationMatrix R = exp_correlation(sites, phi);
  return mvn_draw_centered(mean, f.sig2, R, rng);
}

}  // namespace

RandomEffects simulate_random_effects(const GeneratorSpec& spec, const Design& design,
                                      Rng& rng) {
  RandomEffects re;
  re.beta0_tilde = field_values(spec.gp_beta0, spec.fixed.beta0, spec.sites, rng);
  re.alpha_tilde = field_values(spec.gp_alpha, spec.fixed.alpha, spec.sites, rng);
  re.z_rho = field_values(spec.gp_z_rho, spec.z_rho_mean, spec.sites, rng);
  re.z_sig2 = field_values(spec.gp_z_sig2, spec.z_sig2_mean, spec.sites, rng);

  const int T = spec.T, I = static_cast<int>(spec.sites.size());
  re.psi.zeros(T);
  for (int t = 1; t < T; ++t) {
    re.psi[t] = spec.rho_psi * re.psi[t - 1] +
                std::sqrt(spec.sig2_lambda) * rng.normal();
  }
  re.gamma.set_size(T, I);
  const double sd_eta = std::sqrt(spec.sig2_eta);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < I; ++i) {
      re.gamma(t, i) = re.beta0_tilde[i] + re.alpha_tilde[i] * design.tc[t] +
                       re.psi[t] + sd_eta * rng.normal();
    }
  }
  return re;
}

GaussianMoments stationary_day1(const ModelState& s, const Design& design, int t, int i) {
  const double rho = s.site.rho(i);
  const double denom = 1.0 - rho * rho;
  if (!(denom > 1e-12)) throw NumericError("stationary_day1: |rho_Y| too close to 1");
  const double mu = seasonal_mean(design, s.fixed, 0, design.ec[i]) +
                    s.temporal.gamma(t, i);
  return {mu, s.site.sig2(i) / denom};
}

SimulationResult simulate_panel(const GeneratorSpec& spec) {
  if (spec.sites.empty() || spec.T <= 0 || spec.L <= 0) {
    throw DataError("generator: needs sites, T >= 1 and L >= 1");
  }
  Rng rng(spec.seed);
  SimulationResult out;
  out.design = spec.make_design();
  const Design& d = out.design;
  const int T = spec.T, L = spec.L, I = static_cast<int>(spec.sites.size());

  const RandomEffects re = simulate_random_effects(spec, d, rng);
  out.truth.fixed = spec.fixed;
  out.truth.site.beta0_tilde = re.beta0_tilde;
  out.truth.site.alpha_tilde = re.alpha_tilde;
  out.truth.site.z_rho = re.z_rho;
  out.truth.site.z_sig2 = re.z_sig2;
  out.truth.temporal.psi = re.psi;
  out.truth.temporal.gamma = re.gamma;
  out.truth.hyper.rho_psi = spec.rho_psi;
  out.truth.hyper.sig2_lambda = spec.sig2_lambda;
  out.truth.hyper.sig2_eta = spec.sig2_eta;
  out.truth.hyper.sig2_beta0 = spec.gp_beta0.sig2;
  out.truth.hyper.sig2_alpha = spec.gp_alpha.sig2;
  out.truth.hyper.sig2_z_rho = spec.gp_z_rho.sig2;
  out.truth.hyper.sig2_z_sig2 = spec.gp_z_sig2.sig2;
  out.truth.hyper.z_rho_mean = spec.z_rho_mean;
  out.truth.hyper.z_sig2_mean = spec.z_sig2_mean;

  out.panel.sites = spec.sites;
  out.panel.T = T;
  out.panel.L = L;
  out.panel.first_year = spec.first_year;
  out.panel.values.assign(static_cast<std::size_t>(T) * L * I, 0.0);
  out.panel.miss.assign(out.panel.values.size(), 0);

  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < I; ++i) {
      const double rho = std::tanh(0.5 * re.z_rho[i]);
      const double sd_eps = std::exp(0.5 * re.z_sig2[i]);
      const GaussianMoments day1 = stationary_day1(out.truth, d, t, i);
      double prev = day1.mean + std::sqrt(day1.var) * rng.normal();
      out.panel.values[out.panel.idx(t, 0, i)] = prev;
      double prev_mu = seasonal_mean(d, spec.fixed, 0, d.ec[i]) + re.gamma(t, i);
      for (int l = 1; l < L; ++l) {
        const double mu = seasonal_mean(d, spec.fixed, l, d.ec[i]) + re.gamma(t, i);
        const double y = mu + rho * (prev - prev_mu) + sd_eps * rng.normal();
        out.panel.values[out.panel.idx(t, l, i)] = y;
        prev = y;
        prev_mu = mu;
      }
    }
  }
  return out;
}

ModelState draw_state_from_prior(const GibbsSampler& sampler, Rng& rng) {
  const HyperPriors& pr = sampler.priors();
  const FitOptions& opts = sampler.options();
  const Design& d = sampler.design();
  const int T = sampler.data().T, I = sampler.data().I();

  ModelState s;
  s.fixed.beta0 = rng.normal(pr.beta0.mean, pr.beta0.sd);
  s.fixed.alpha = rng.normal(pr.alpha.mean, pr.alpha.sd);
  s.fixed.beta1 = rng.normal(pr.beta1.mean, pr.beta1.sd);
  s.fixed.beta2 = rng.normal(pr.beta2.mean, pr.beta2.sd);
  s.fixed.beta3 = d.include_elevation ? rng.normal(pr.beta3.mean, pr.beta3.sd) : 0.0;
  s.hyper.z_rho_mean = rng.normal(pr.z_rho_mean.mean, pr.z_rho_mean.sd);
  s.hyper.z_sig2_mean = rng.normal(pr.z_sig2_mean.mean, pr.z_sig2_mean.sd);
  s.hyper.rho_psi = opts.pin_rho_psi_zero
                        ? 0.0
                        : rng.uniform(pr.rho_psi_lower, pr.rho_psi_upper);
  s.hyper.sig2_lambda = rng.inv_gamma(pr.sig2_lambda.a, pr.sig2_lambda.b);
  s.hyper.sig2_eta = rng.inv_gamma(pr.sig2_eta.a, pr.sig2_eta.b);
  s.hyper.sig2_beta0 = rng.inv_gamma(pr.sig2_beta0.a, pr.sig2_beta0.b);
  s.hyper.sig2_alpha = rng.inv_gamma(pr.sig2_alpha.a, pr.sig2_alpha.b);
  s.hyper.sig2_z_rho = rng.inv_gamma(pr.sig2_z_rho.a, pr.sig2_z_rho.b);
  s.hyper.sig2_z_sig2 = rng.inv_gamma(pr.sig2_z_sig2.a, pr.sig2_z_sig2.b);

  if (opts.phi_mode == PhiMode::Grid) {
    const auto& grid = sampler.phi_grid();
    auto draw_idx = [&]() {
      return static_cast<int>(rng.uniform() * grid.size()) %
             static_cast<int>(grid.size());
    };
    s.hyper.phi_idx_beta0 = draw_idx();
    s.hyper.phi_idx_alpha = draw_idx();
    s.hyper.phi_idx_z_rho = draw_idx();
    s.hyper.phi_idx_z_sig2 = draw_idx();
    s.hyper.phi_beta0 = grid[s.hyper.phi_idx_beta0];
    s.hyper.phi_alpha = grid[s.hyper.phi_idx_alpha];
    s.hyper.phi_z_rho = grid[s.hyper.phi_idx_z_rho];
    s.hyper.phi_z_sig2 = grid[s.hyper.phi_idx_z_sig2];
  } else {
    s.hyper.phi_beta0 = s.hyper.phi_alpha = s.hyper.phi_z_rho = s.hyper.phi_z_sig2 =
        sampler.phi_fixed_value();
  }

  auto field = [&](bool on, Field f, double mean, double sig2) {
    if (!on) return arma::vec(I, arma::fill::value(mean));
    return mvn_draw_centered(mean, sig2, sampler.corr(f, s), rng);
  };
  const ModelVariant& v = opts.variant;
  s.site.beta0_tilde = field(v.gp_beta0, Field::Beta0, s.fixed.beta0, s.hyper.sig2_beta0);
  s.site.alpha_tilde = field(v.gp_alpha, Field::Alpha, s.fixed.alpha, s.hyper.sig2_alpha);
  s.site.z_rho = field(v.gp_z_rho, Field::ZRho, s.hyper.z_rho_mean, s.hyper.sig2_z_rho);
  s.site.z_sig2 =
      field(v.gp_z_sig2, Field::ZSig2, s.hyper.z_sig2_mean, s.hyper.sig2_z_sig2);

  s.temporal.psi.zeros(T);
  for (int t = 1; t < T; ++t) {
    s.temporal.psi[t] = s.hyper.rho_psi * s.temporal.psi[t - 1] +
                        std::sqrt(s.hyper.sig2_lambda) * rng.normal();
  }
  s.temporal.gamma.set_size(T, I);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < I; ++i) {
      s.temporal.gamma(t, i) =
          rng.normal(s.site.beta0_tilde[i] + s.site.alpha_tilde[i] * d.tc[t] +
                         s.temporal.psi[t],
                     std::sqrt(s.hyper.sig2_eta));
    }
  }
  return s;
}

void regenerate_days(PanelDataset& data, const Design& design, const ModelState& s,
                     Rng& rng) {
  for (int t = 0; t < data.T; ++t) {
    for (int i = 0; i < data.I(); ++i) {
      const double rho = s.site.rho(i);
      const double sd = std::sqrt(s.site.sig2(i));
      double prev = data.value(t, 0, i);
      double prev_mu = seasonal_mean(design, s.fixed, 0, design.ec[i]) +
                       s.temporal.gamma(t, i);
      for (int l = 1; l < data.L; ++l) {
        const double mu = seasonal_mean(design, s.fixed, l, design.ec[i]) +
                          s.temporal.gamma(t, i);
        const double y = mu + rho * (prev - prev_mu) + sd * rng.normal();
        data.values[data.idx(t, l, i)] = y;
        prev = y;
        prev_mu = mu;
      }
    }
  }
}

}  // namespace daymax
