#include "daymax/gibbs.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace daymax {

namespace {

double ig_logpdf(double x, double a, double b) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
}

}  // namespace

GaussianMoments combine_normals(std::span<const GaussianMoments> terms) {
  if (terms.empty()) throw std::invalid_argument("combine_normals: empty list");
  double prec = 0.0, pm = 0.0;
  for (const auto& t : terms) {
    if (!(t.var > 0.0)) throw std::invalid_argument("combine_normals: variance <= 0");
    const double p = 1.0 / t.var;
    prec += p;
    pm += p * t.mean;
  }
  if (!(prec > 0.0) || !std::isfinite(prec)) {
    throw NumericError("combine_normals: degenerate total precision");
  }
  return {pm / prec, 1.0 / prec};
}

void ResidualWorkspace::recompute(const PanelDataset& data, const Design& design,
                                  const ModelState& s) {
  T = data.T;
  L = data.L;
  I = data.I();
  X.set_size(static_cast<std::size_t>(T) * L * I);
  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < L; ++l) {
      for (int i = 0; i < I; ++i) {
        const double mu = seasonal_mean(design, s.fixed, l, design.ec[i]);
        x(t, l, i) = data.value(t, l, i) - mu - s.temporal.gamma(t, i);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// MH tuner
// ---------------------------------------------------------------------------

void MhTuner::count_rho(std::size_t slot, bool accepted) {
  if (adapting) {
    ++win_try_rho[slot];
    if (accepted) ++win_acc_rho[slot];
  } else {
    ++post_try_rho[slot];
    if (accepted) ++post_acc_rho[slot];
  }
}

void MhTuner::count_sig(std::size_t slot, bool accepted) {
  if (adapting) {
    ++win_try_sig[slot];
    if (accepted) ++win_acc_sig[slot];
  } else {
    ++post_try_sig[slot];
    if (accepted) ++post_acc_sig[slot];
  }
}

void MhTuner::adapt() {
  if (!adapting) return;
  auto step = [](arma::vec& sd, arma::uvec& acc, arma::uvec& tries) {
    for (std::size_t k = 0; k < sd.n_elem; ++k) {
      if (tries[k] == 0) continue;
      const double rate = double(acc[k]) / double(tries[k]);
      if (rate > 0.40) {
        sd[k] *= 1.1;
      } else if (rate < 0.15) {
        sd[k] /= 1.1;
      }
      acc[k] = 0;
      tries[k] = 0;
    }
  };
  step(sd_z_rho, win_acc_rho, win_try_rho);
  step(sd_z_sig2, win_acc_sig, win_try_sig);
}

void MhTuner::freeze() {
  adapting = false;
  post_acc_rho.zeros();
  post_try_rho.zeros();
  post_acc_sig.zeros();
  post_try_sig.zeros();
}

// ---------------------------------------------------------------------------
// Parameter layout
// ---------------------------------------------------------------------------

int ParamLayout::find(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return static_cast<int>(k);
  }
  return -1;
}

ParamLayout ParamLayout::create(const ModelVariant& variant, const FitOptions& opts,
                                int T, int I, const std::vector<std::string>& ids) {
  ParamLayout lay;
  lay.T = T;
  lay.I = I;
  auto add = [&lay](int& slot, const std::string& name) {
    slot = static_cast<int>(lay.names.size());
    lay.names.push_back(name);
  };
  add(lay.beta0, "beta0");
  add(lay.alpha, "alpha");
  add(lay.beta1, "beta1");
  add(lay.beta2, "beta2");
  if (opts.include_elevation) add(lay.beta3, "beta3");
  add(lay.z_rho_mean, "z_rho_mean");
  add(lay.z_sig2_mean, "z_sig2_mean");
  if (!opts.pin_rho_psi_zero) add(lay.rho_psi, "rho_psi");
  add(lay.sig2_lambda, "sig2_lambda");
  add(lay.sig2_eta, "sig2_eta");
  if (variant.gp_beta0) add(lay.sig2_beta0, "sig2_beta0");
  if (variant.gp_alpha) add(lay.sig2_alpha, "sig2_alpha");
  if (variant.gp_z_rho) add(lay.sig2_z_rho, "sig2_z_rho");
  if (variant.gp_z_sig2) add(lay.sig2_z_sig2, "sig2_z_sig2");
  if (opts.phi_mode == PhiMode::Grid) {
    if (variant.gp_beta0) add(lay.phi_beta0, "phi_beta0");
    if (variant.gp_alpha) add(lay.phi_alpha, "phi_alpha");
    if (variant.gp_z_rho) add(lay.phi_z_rho, "phi_z_rho");
    if (variant.gp_z_sig2) add(lay.phi_z_sig2, "phi_z_sig2");
  }
  auto add_block = [&lay, &ids](int& slot, const std::string& prefix) {
    slot = static_cast<int>(lay.names.size());
    for (const auto& id : ids) lay.names.push_back(prefix + "[" + id + "]");
  };
  if (variant.gp_beta0) add_block(lay.beta0_tilde, "beta0_tilde");
  if (variant.gp_alpha) add_block(lay.alpha_tilde, "alpha_tilde");
  if (variant.gp_z_rho) add_block(lay.z_rho, "z_rho");
  if (variant.gp_z_sig2) add_block(lay.z_sig2, "z_sig2");
  if (T >= 2) {
    lay.psi = static_cast<int>(lay.names.size());
    for (int t = 2; t <= T; ++t) lay.names.push_back("psi[" + std::to_string(t) + "]");
  }
  lay.gamma = static_cast<int>(lay.names.size());
  for (int t = 1; t <= T; ++t) {
    for (const auto& id : ids) {
      lay.names.push_back("gamma[" + std::to_string(t) + ":" + id + "]");
    }
  }
  return lay;
}

namespace {

arma::rowvec pack_state(const ParamLayout& lay, const ModelState& s) {
  arma::rowvec row(lay.size(), arma::fill::zeros);
  row[lay.beta0] = s.fixed.beta0;
  row[lay.alpha] = s.fixed.alpha;
  row[lay.beta1] = s.fixed.beta1;
  row[lay.beta2] = s.fixed.beta2;
  if (lay.beta3 >= 0) row[lay.beta3] = s.fixed.beta3;
  row[lay.z_rho_mean] = s.hyper.z_rho_mean;
  row[lay.z_sig2_mean] = s.hyper.z_sig2_mean;
  if (lay.rho_psi >= 0) row[lay.rho_psi] = s.hyper.rho_psi;
  row[lay.sig2_lambda] = s.hyper.sig2_lambda;
  row[lay.sig2_eta] = s.hyper.sig2_eta;
  if (lay.sig2_beta0 >= 0) row[lay.sig2_beta0] = s.hyper.sig2_beta0;
  if (lay.sig2_alpha >= 0) row[lay.sig2_alpha] = s.hyper.sig2_alpha;
  if (lay.sig2_z_rho >= 0) row[lay.sig2_z_rho] = s.hyper.sig2_z_rho;
  if (lay.sig2_z_sig2 >= 0) row[lay.sig2_z_sig2] = s.hyper.sig2_z_sig2;
  if (lay.phi_beta0 >= 0) row[lay.phi_beta0] = s.hyper.phi_beta0;
  if (lay.phi_alpha >= 0) row[lay.phi_alpha] = s.hyper.phi_alpha;
  if (lay.phi_z_rho >= 0) row[lay.phi_z_rho] = s.hyper.phi_z_rho;
  if (lay.phi_z_sig2 >= 0) row[lay.phi_z_sig2] = s.hyper.phi_z_sig2;
  const int I = lay.I, T = lay.T;
  for (int i = 0; i < I; ++i) {
    if (lay.beta0_tilde >= 0) row[lay.beta0_tilde + i] = s.site.beta0_tilde[i];
    if (lay.alpha_tilde >= 0) row[lay.alpha_tilde + i] = s.site.alpha_tilde[i];
    if (lay.z_rho >= 0) row[lay.z_rho + i] = s.site.z_rho[i];
    if (lay.z_sig2 >= 0) row[lay.z_sig2 + i] = s.site.z_sig2[i];
  }
  if (lay.psi >= 0) {
    for (int t = 1; t < T; ++t) row[lay.psi + t - 1] = s.temporal.psi[t];
  }
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < I; ++i) row[lay.gamma + t * I + i] = s.temporal.gamma(t, i);
  }
  return row;
}

}  // namespace

ModelState ChainOutput::state_at(long draw) const {
  const ParamLayout& lay = layout;
  const arma::rowvec row = draws.row(draw);
  ModelState s;
  s.fixed.beta0 = row[lay.beta0];
  s.fixed.alpha = row[lay.alpha];
  s.fixed.beta1 = row[lay.beta1];
  s.fixed.beta2 = row[lay.beta2];
  s.fixed.beta3 = lay.beta3 >= 0 ? row[lay.beta3] : 0.0;
  s.hyper.z_rho_mean = row[lay.z_rho_mean];
  s.hyper.z_sig2_mean = row[lay.z_sig2_mean];
  s.hyper.rho_psi = lay.rho_psi >= 0 ? row[lay.rho_psi] : 0.0;
  s.hyper.sig2_lambda = row[lay.sig2_lambda];
  s.hyper.sig2_eta = row[lay.sig2_eta];
  if (lay.sig2_beta0 >= 0) s.hyper.sig2_beta0 = row[lay.sig2_beta0];
  if (lay.sig2_alpha >= 0) s.hyper.sig2_alpha = row[lay.sig2_alpha];
  if (lay.sig2_z_rho >= 0) s.hyper.sig2_z_rho = row[lay.sig2_z_rho];
  if (lay.sig2_z_sig2 >= 0) s.hyper.sig2_z_sig2 = row[lay.sig2_z_sig2];
  s.hyper.phi_beta0 = lay.phi_beta0 >= 0 ? row[lay.phi_beta0] : meta.phi_fixed;
  s.hyper.phi_alpha = lay.phi_alpha >= 0 ? row[lay.phi_alpha] : meta.phi_fixed;
  s.hyper.phi_z_rho = lay.phi_z_rho >= 0 ? row[lay.phi_z_rho] : meta.phi_fixed;
  s.hyper.phi_z_sig2 = lay.phi_z_sig2 >= 0 ? row[lay.phi_z_sig2] : meta.phi_fixed;
  const int T = lay.T, I = lay.I;
  s.site.beta0_tilde.set_size(I);
  s.site.alpha_tilde.set_size(I);
  s.site.z_rho.set_size(I);
  s.site.z_sig2.set_size(I);
  for (int i = 0; i < I; ++i) {
    s.site.beta0_tilde[i] = lay.beta0_tilde >= 0 ? row[lay.beta0_tilde + i] : s.fixed.beta0;
    s.site.alpha_tilde[i] = lay.alpha_tilde >= 0 ? row[lay.alpha_tilde + i] : s.fixed.alpha;
    s.site.z_rho[i] = lay.z_rho >= 0 ? row[lay.z_rho + i] : s.hyper.z_rho_mean;
    s.site.z_sig2[i] = lay.z_sig2 >= 0 ? row[lay.z_sig2 + i] : s.hyper.z_sig2_mean;
  }
  s.temporal.psi.zeros(T);
  if (lay.psi >= 0) {
    for (int t = 1; t < T; ++t) s.temporal.psi[t] = row[lay.psi + t - 1];
  }
  s.temporal.gamma.set_size(T, I);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < I; ++i) s.temporal.gamma(t, i) = row[lay.gamma + t * I + i];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Sampler construction
// ---------------------------------------------------------------------------

GibbsSampler::GibbsSampler(const PanelDataset& data, const Design& design,
                           const HyperPriors& priors, const FitOptions& opts)
    : data_(data), design_(design), priors_(priors), opts_(opts) {
  priors_.validate();
  if (data_.T <= 0 || data_.L <= 0 || data_.I() <= 0) {
    throw DataError("sampler: empty panel");
  }
  const bool any_gp = opts_.variant.n_processes() > 0;
  const bool multi_site = data_.I() >= 2;
  phi_fixed_ = opts_.phi_fixed > 0.0
                   ? opts_.phi_fixed
                   : (multi_site ? default_phi(data_.sites) : 1.0);
  if (opts_.phi_mode == PhiMode::Grid) {
    phi_grid_ = priors_.phi_grid;
    if (phi_grid_.empty()) {
      // Log-spaced around the 3/d_max rule, spanning ranges from 3x the
      // maximum distance down to a tenth of it.
      const int n = std::max(2, opts_.phi_grid_n);
      const double lo = phi_fixed_ / 3.0, hi = phi_fixed_ * 10.0;
      for (int k = 0; k < n; ++k) {
        phi_grid_.push_back(lo * std::pow(hi / lo, double(k) / double(n - 1)));
      }
    }
    if (any_gp) {
      for (double phi : phi_grid_) {
        corr_grid_.push_back(exp_correlation(data_.sites, phi));
      }
    }
  } else if (any_gp) {
    corr_fixed_ = exp_correlation(data_.sites, phi_fixed_);
  }
}

const CorrelationMatrix& GibbsSampler::corr(Field which, const ModelState& s) const {
  if (opts_.phi_mode == PhiMode::Fixed) return corr_fixed_;
  int idx = -1;
  switch (which) {
    case Field::Beta0: idx = s.hyper.phi_idx_beta0; break;
    case Field::Alpha: idx = s.hyper.phi_idx_alpha; break;
    case Field::ZRho: idx = s.hyper.phi_idx_z_rho; break;
    case Field::ZSig2: idx = s.hyper.phi_idx_z_sig2; break;
  }
  if (idx < 0 || idx >= static_cast<int>(corr_grid_.size())) {
    throw Error("corr: decay grid index not set");
  }
  return corr_grid_[idx];
}

ModelState GibbsSampler::initial_state() const {
  const int T = data_.T, L = data_.L, I = data_.I();
  ModelState s;

  // Pooled least squares on the AR-free mean.
  const int p = design_.include_elevation ? 5 : 4;
  arma::mat A(p, p, arma::fill::zeros);
  arma::vec b(p, arma::fill::zeros);
  arma::vec reg(p);
  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < L; ++l) {
      for (int i = 0; i < I; ++i) {
        reg[0] = 1.0;
        reg[1] = design_.tc[t];
        reg[2] = design_.sc[l];
        reg[3] = design_.cc[l];
        if (p == 5) reg[4] = design_.ec[i];
        A += reg * reg.t();
        b += reg * data_.value(t, l, i);
      }
    }
  }
  const arma::vec beta = arma::pinv(A) * b;
  s.fixed.beta0 = beta[0];
  s.fixed.alpha = beta[1];
  s.fixed.beta1 = beta[2];
  s.fixed.beta2 = beta[3];
  s.fixed.beta3 = p == 5 ? beta[4] : 0.0;

  // Per-site lag-1 autocorrelation and innovation variance of the residuals.
  s.site.beta0_tilde.set_size(I);
  s.site.alpha_tilde.set_size(I);
  s.site.z_rho.set_size(I);
  s.site.z_sig2.set_size(I);
  for (int i = 0; i < I; ++i) {
    double num = 0.0, den = 0.0;
    auto resid = [&](int t, int l) {
      const double mu = s.fixed.beta0 + s.fixed.alpha * design_.tc[t] +
                        s.fixed.beta1 * design_.sc[l] + s.fixed.beta2 * design_.cc[l] +
                        (p == 5 ? s.fixed.beta3 * design_.ec[i] : 0.0);
      return data_.value(t, l, i) - mu;
    };
    for (int t = 0; t < T; ++t) {
      for (int l = 1; l < L; ++l) {
        num += resid(t, l) * resid(t, l - 1);
        den += resid(t, l - 1) * resid(t, l - 1);
      }
    }
    const double rho = den > 0.0 ? std::clamp(num / den, -0.95, 0.95) : 0.0;
    double ss = 0.0;
    long n = 0;
    for (int t = 0; t < T; ++t) {
      for (int l = 1; l < L; ++l) {
        const double e = resid(t, l) - rho * resid(t, l - 1);
        ss += e * e;
        ++n;
      }
    }
    const double v = n > 0 ? std::max(ss / n, 1e-8) : 1.0;
    s.site.z_rho[i] = 2.0 * std::atanh(rho);
    s.site.z_sig2[i] = std::log(v);
    s.site.beta0_tilde[i] = s.fixed.beta0;
    s.site.alpha_tilde[i] = s.fixed.alpha;
  }
  s.hyper.z_rho_mean = arma::mean(s.site.z_rho);
  s.hyper.z_sig2_mean = arma::mean(s.site.z_sig2);
  if (!opts_.variant.gp_z_rho) s.site.z_rho.fill(s.hyper.z_rho_mean);
  if (!opts_.variant.gp_z_sig2) s.site.z_sig2.fill(s.hyper.z_sig2_mean);

  s.hyper.rho_psi = 0.0;
  s.hyper.sig2_lambda = priors_.sig2_lambda.mean();
  s.hyper.sig2_eta = priors_.sig2_eta.mean();
  s.hyper.sig2_beta0 = priors_.sig2_beta0.mean();
  s.hyper.sig2_alpha = priors_.sig2_alpha.mean();
  s.hyper.sig2_z_rho = priors_.sig2_z_rho.mean();
  s.hyper.sig2_z_sig2 = priors_.sig2_z_sig2.mean();

  if (opts_.phi_mode == PhiMode::Grid) {
    int best = 0;
    for (std::size_t k = 1; k < phi_grid_.size(); ++k) {
      if (std::abs(phi_grid_[k] - phi_fixed_) < std::abs(phi_grid_[best] - phi_fixed_)) {
        best = static_cast<int>(k);
      }
    }
    s.hyper.phi_beta0 = s.hyper.phi_alpha = s.hyper.phi_z_rho = s.hyper.phi_z_sig2 =
        phi_grid_[best];
    s.hyper.phi_idx_beta0 = s.hyper.phi_idx_alpha = s.hyper.phi_idx_z_rho =
        s.hyper.phi_idx_z_sig2 = best;
  } else {
    s.hyper.phi_beta0 = s.hyper.phi_alpha = s.hyper.phi_z_rho = s.hyper.phi_z_sig2 =
        phi_fixed_;
  }

  s.temporal.psi.zeros(T);
  s.temporal.gamma.set_size(T, I);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < I; ++i) {
      s.temporal.gamma(t, i) =
          s.site.beta0_tilde[i] + s.site.alpha_tilde[i] * design_.tc[t];
    }
  }
  return s;
}

ResidualWorkspace GibbsSampler::make_workspace(const ModelState& s) const {
  ResidualWorkspace ws;
  ws.recompute(data_, design_, s);
  return ws;
}

MhTuner GibbsSampler::make_tuner() const {
  MhTuner t;
  t.window = opts_.mh_window;
  t.adapting = opts_.mh_adapt;
  const int n_rho = opts_.variant.gp_z_rho ? data_.I() : 1;
  const int n_sig = opts_.variant.gp_z_sig2 ? data_.I() : 1;
  // Start near the random-walk optimum for a log-likelihood with n
  // observations (sd ~ 2.4 / sqrt(n)); the window rule only moves the
  // scale by 10% per window, so a size-blind start would need thousands
  // of burn-in iterations on long panels.
  const double n_site = double(data_.T) * std::max(1, data_.L - 1);
  auto start = [&](int slots) {
    const double n_info = slots == 1 ? n_site * data_.I() : n_site;
    return std::clamp(2.4 / std::sqrt(n_info), 0.01, opts_.mh_initial_sd);
  };
  t.sd_z_rho.set_size(n_rho);
  t.sd_z_rho.fill(start(n_rho));
  t.sd_z_sig2.set_size(n_sig);
  t.sd_z_sig2.fill(start(n_sig));
  t.win_acc_rho.zeros(n_rho);
  t.win_try_rho.zeros(n_rho);
  t.win_acc_sig.zeros(n_sig);
  t.win_try_sig.zeros(n_sig);
  t.post_acc_rho.zeros(n_rho);
  t.post_try_rho.zeros(n_rho);
  t.post_acc_sig.zeros(n_sig);
  t.post_try_sig.zeros(n_sig);
  return t;
}

// ---------------------------------------------------------------------------
// Full conditionals
// ---------------------------------------------------------------------------

GaussianMoments GibbsSampler::fc_fixed_effect(Coef which, const ModelState& s,
                                              const ResidualWorkspace& ws) const {
  const int T = data_.T, L = data_.L, I = data_.I();
  const GaussianPrior& prior = which == Coef::Beta1   ? priors_.beta1
                               : which == Coef::Beta2 ? priors_.beta2
                                                      : priors_.beta3;
  const double cur = which == Coef::Beta1   ? s.fixed.beta1
                     : which == Coef::Beta2 ? s.fixed.beta2
                                            : s.fixed.beta3;
  double prec = 1.0 / (prior.sd * prior.sd);
  double pm = prior.mean * prec;
  for (int i = 0; i < I; ++i) {
    const double rho = s.site.rho(i);
    const double inv_s2 = 1.0 / s.site.sig2(i);
    double sum_g2 = 0.0, sum_gdx = 0.0;
    if (which == Coef::Beta3) {
      const double g = design_.ec[i] * (1.0 - rho);
      double sum_dx = 0.0;
      for (int t = 0; t < T; ++t) {
        for (int l = 1; l < L; ++l) {
          sum_dx += ws.x(t, l, i) - rho * ws.x(t, l - 1, i);
        }
      }
      sum_g2 = double(T) * (L - 1) * g * g;
      sum_gdx = g * sum_dx + sum_g2 * cur;
    } else {
      const arma::vec& v = which == Coef::Beta1 ? design_.sc : design_.cc;
      for (int l = 1; l < L; ++l) {
        const double g = v[l] - rho * v[l - 1];
        sum_g2 += g * g;
        double sum_t = 0.0;
        for (int t = 0; t < T; ++t) {
          sum_t += ws.x(t, l, i) - rho * ws.x(t, l - 1, i);
        }
        sum_gdx += g * sum_t;
      }
      sum_g2 *= double(T);
      sum_gdx += sum_g2 * cur;
    }
    prec += sum_g2 * inv_s2;
    pm += sum_gdx * inv_s2;
  }
  if (!std::isfinite(prec) || !(prec > 0.0) || !std::isfinite(pm)) {
    throw NumericError("fixed-effect update: degenerate denominator");
  }
  return {pm / prec, 1.0 / prec};
}

GaussianMoments GibbsSampler::gp_conditional(const arma::vec& field, double mean,
                                             double sig2, const CorrelationMatrix& R,
                                             int i) const {
  const double rii = R.Rinv(i, i);
  double adj = 0.0;
  for (int k = 0; k < R.n(); ++k) {
    if (k == i) continue;
    adj += R.Rinv(i, k) * (mean - field[k]);
  }
  return {mean + adj / rii, sig2 / rii};
}

GaussianMoments GibbsSampler::fc_global_mean(Field which, const ModelState& s) const {
  const int T = data_.T, I = data_.I();
  GaussianMoments like;
  GaussianPrior prior;
  switch (which) {
    case Field::Beta0: {
      prior = priors_.beta0;
      if (opts_.variant.gp_beta0) {
        const CorrelationMatrix& R = corr(Field::Beta0, s);
        like.var = s.hyper.sig2_beta0 / R.sum_Rinv;
        like.mean = arma::accu(R.Rinv * s.site.beta0_tilde) / R.sum_Rinv;
      } else {
        double sum = 0.0;
        for (int t = 0; t < T; ++t) {
          for (int i = 0; i < I; ++i) {
            sum += s.temporal.gamma(t, i) - s.site.alpha_tilde[i] * design_.tc[t] -
                   s.temporal.psi[t];
          }
        }
        like.var = s.hyper.sig2_eta / (double(I) * T);
        like.mean = sum / (double(I) * T);
      }
      break;
    }
    case Field::Alpha: {
      prior = priors_.alpha;
      if (opts_.variant.gp_alpha) {
        const CorrelationMatrix& R = corr(Field::Alpha, s);
        like.var = s.hyper.sig2_alpha / R.sum_Rinv;
        like.mean = arma::accu(R.Rinv * s.site.alpha_tilde) / R.sum_Rinv;
      } else {
        const double sum_tc2 = arma::dot(design_.tc, design_.tc);
        if (sum_tc2 <= 0.0) return {prior.mean, prior.sd * prior.sd};
        double sum = 0.0;
        for (int t = 0; t < T; ++t) {
          for (int i = 0; i < I; ++i) {
            sum += design_.tc[t] *
                   (s.temporal.gamma(t, i) - s.site.beta0_tilde[i] - s.temporal.psi[t]);
          }
        }
        like.var = s.hyper.sig2_eta / (double(I) * sum_tc2);
        like.mean = sum / (double(I) * sum_tc2);
      }
      break;
    }
    case Field::ZRho: {
      prior = priors_.z_rho_mean;
      if (!opts_.variant.gp_z_rho) {
        throw Error("fc_global_mean: z_rho mean is non-Gaussian when its GP is off");
      }
      const CorrelationMatrix& R = corr(Field::ZRho, s);
      like.var = s.hyper.sig2_z_rho / R.sum_Rinv;
      like.mean = arma::accu(R.Rinv * s.site.z_rho) / R.sum_Rinv;
      break;
    }
    case Field::ZSig2: {
      prior = priors_.z_sig2_mean;
      if (!opts_.variant.gp_z_sig2) {
        throw Error("fc_global_mean: z_sig2 mean is non-Gaussian when its GP is off");
      }
      const CorrelationMatrix& R = corr(Field::ZSig2, s);
      like.var = s.hyper.sig2_z_sig2 / R.sum_Rinv;
      like.mean = arma::accu(R.Rinv * s.site.z_sig2) / R.sum_Rinv;
      break;
    }
  }
  const GaussianMoments terms[] = {like, {prior.mean, prior.sd * prior.sd}};
  return combine_normals(terms);
}

TruncGaussian GibbsSampler::fc_rho_psi(const ModelState& s) const {
  const int T = data_.T;
  if (T < 2) throw DataError("fc_rho_psi: requires T >= 2");
  double num = 0.0, den = 0.0;
  for (int t = 1; t < T; ++t) {
    num += s.temporal.psi[t] * s.temporal.psi[t - 1];
    den += s.temporal.psi[t - 1] * s.temporal.psi[t - 1];
  }
  TruncGaussian out;
  out.lower = priors_.rho_psi_lower;
  out.upper = priors_.rho_psi_upper;
  if (den > 0.0) {
    out.mean = num / den;
    out.var = s.hyper.sig2_lambda / den;
    out.informative = true;
  } else {
    out.informative = false;
  }
  return out;
}

GammaMoments GibbsSampler::fc_precision(Var which, const ModelState& s) const {
  const int T = data_.T, I = data_.I();
  GammaMoments g;
  switch (which) {
    case Var::Lambda: {
      double ss = 0.0;
      for (int t = 1; t < T; ++t) {
        const double e = s.temporal.psi[t] - s.hyper.rho_psi * s.temporal.psi[t - 1];
        ss += e * e;
      }
      g.shape = 0.5 * (T - 1) + priors_.sig2_lambda.a;
      g.rate = 0.5 * ss + priors_.sig2_lambda.b;
      break;
    }
    case Var::Eta: {
      double ss = 0.0;
      for (int t = 0; t < T; ++t) {
        for (int i = 0; i < I; ++i) {
          const double e = s.temporal.gamma(t, i) -
                           (s.site.beta0_tilde[i] +
                            s.site.alpha_tilde[i] * design_.tc[t] + s.temporal.psi[t]);
          ss += e * e;
        }
      }
      g.shape = 0.5 * double(I) * T + priors_.sig2_eta.a;
      g.rate = 0.5 * ss + priors_.sig2_eta.b;
      break;
    }
    case Var::Beta0: {
      if (!opts_.variant.gp_beta0) throw Error("fc_precision: beta0 GP is off");
      const double q =
          centered_quadform(s.site.beta0_tilde, s.fixed.beta0, corr(Field::Beta0, s));
      g.shape = 0.5 * I + priors_.sig2_beta0.a;
      g.rate = 0.5 * q + priors_.sig2_beta0.b;
      break;
    }
    case Var::Alpha: {
      if (!opts_.variant.gp_alpha) throw Error("fc_precision: alpha GP is off");
      const double q =
          centered_quadform(s.site.alpha_tilde, s.fixed.alpha, corr(Field::Alpha, s));
      g.shape = 0.5 * I + priors_.sig2_alpha.a;
      g.rate = 0.5 * q + priors_.sig2_alpha.b;
      break;
    }
    case Var::ZRho: {
      if (!opts_.variant.gp_z_rho) throw Error("fc_precision: z_rho GP is off");
      const double q =
          centered_quadform(s.site.z_rho, s.hyper.z_rho_mean, corr(Field::ZRho, s));
      g.shape = 0.5 * I + priors_.sig2_z_rho.a;
      g.rate = 0.5 * q + priors_.sig2_z_rho.b;
      break;
    }
    case Var::ZSig2: {
      if (!opts_.variant.gp_z_sig2) throw Error("fc_precision: z_sig2 GP is off");
      const double q =
          centered_quadform(s.site.z_sig2, s.hyper.z_sig2_mean, corr(Field::ZSig2, s));
      g.shape = 0.5 * I + priors_.sig2_z_sig2.a;
      g.rate = 0.5 * q + priors_.sig2_z_sig2.b;
      break;
    }
  }
  return g;
}

GaussianMoments GibbsSampler::fc_site_field(Field which, int i, const ModelState& s) const {
  const int T = data_.T;
  std::vector<GaussianMoments> terms;
  if (which == Field::Beta0) {
    double sum = 0.0;
    for (int t = 0; t < T; ++t) {
      sum += s.temporal.gamma(t, i) - s.site.alpha_tilde[i] * design_.tc[t] -
             s.temporal.psi[t];
    }
    terms.push_back({sum / T, s.hyper.sig2_eta / T});
    terms.push_back(gp_conditional(s.site.beta0_tilde, s.fixed.beta0, s.hyper.sig2_beta0,
                                   corr(Field::Beta0, s), i));
  } else if (which == Field::Alpha) {
    const double sum_tc2 = arma::dot(design_.tc, design_.tc);
    if (sum_tc2 > 0.0) {
      double sum = 0.0;
      for (int t = 0; t < T; ++t) {
        sum += design_.tc[t] *
               (s.temporal.gamma(t, i) - s.site.beta0_tilde[i] - s.temporal.psi[t]);
      }
      terms.push_back({sum / sum_tc2, s.hyper.sig2_eta / sum_tc2});
    }
    terms.push_back(gp_conditional(s.site.alpha_tilde, s.fixed.alpha, s.hyper.sig2_alpha,
                                   corr(Field::Alpha, s), i));
  } else {
    throw Error("fc_site_field: only the beta0/alpha fields have Gaussian conditionals");
  }
  return combine_normals(terms);
}

GaussianMoments GibbsSampler::fc_psi(int t, const ModelState& s) const {
  const int T = data_.T, I = data_.I();
  if (t <= 0 || t >= T) throw DataError("fc_psi: t must be in 2..T (psi_1 is pinned)");
  double sum = 0.0;
  for (int i = 0; i < I; ++i) {
    sum += s.temporal.gamma(t, i) - s.site.beta0_tilde[i] -
           s.site.alpha_tilde[i] * design_.tc[t];
  }
  const GaussianMoments like{sum / I, s.hyper.sig2_eta / I};
  GaussianMoments ar;
  const double rp = s.hyper.rho_psi;
  if (t < T - 1) {
    ar.mean = rp * (s.temporal.psi[t - 1] + s.temporal.psi[t + 1]) / (1.0 + rp * rp);
    ar.var = s.hyper.sig2_lambda / (1.0 + rp * rp);
  } else {
    ar.mean = rp * s.temporal.psi[t - 1];
    ar.var = s.hyper.sig2_lambda;
  }
  const GaussianMoments terms[] = {like, ar};
  return combine_normals(terms);
}

GaussianMoments GibbsSampler::fc_gamma(int t, int i, const ModelState& s,
                                       const ResidualWorkspace& ws) const {
  const int L = data_.L;
  const double rho = s.site.rho(i);
  const double g = s.temporal.gamma(t, i);
  std::vector<GaussianMoments> terms;
  if (L >= 2) {
    double sum = 0.0;
    for (int l = 1; l < L; ++l) {
      sum += (ws.x(t, l, i) - rho * ws.x(t, l - 1, i)) + g * (1.0 - rho);
    }
    const double one_minus = 1.0 - rho;
    if (one_minus == 0.0) throw NumericError("fc_gamma: rho_Y(s_i) equals one");
    terms.push_back({sum / ((L - 1) * one_minus),
                     s.site.sig2(i) / ((L - 1) * one_minus * one_minus)});
  }
  terms.push_back({s.site.beta0_tilde[i] + s.site.alpha_tilde[i] * design_.tc[t] +
                       s.temporal.psi[t],
                   s.hyper.sig2_eta});
  return combine_normals(terms);
}

double GibbsSampler::site_ar_ss(int i, double rho, const ResidualWorkspace& ws) const {
  double ss = 0.0;
  for (int t = 0; t < data_.T; ++t) {
    for (int l = 1; l < data_.L; ++l) {
      const double e = ws.x(t, l, i) - rho * ws.x(t, l - 1, i);
      ss += e * e;
    }
  }
  return ss;
}

double GibbsSampler::mh_logtarget_site(Field which, int i, double z, const ModelState& s,
                                       const ResidualWorkspace& ws) const {
  const double TL1 = double(data_.T) * (data_.L - 1);
  if (which == Field::ZRho) {
    const double rho_z = std::tanh(0.5 * z);
    const double lik = -0.5 * site_ar_ss(i, rho_z, ws) / s.site.sig2(i);
    const GaussianMoments gp = gp_conditional(s.site.z_rho, s.hyper.z_rho_mean,
                                              s.hyper.sig2_z_rho, corr(Field::ZRho, s), i);
    return lik + normal_logpdf(z, gp.mean, gp.var);
  }
  if (which == Field::ZSig2) {
    const double ss = site_ar_ss(i, s.site.rho(i), ws);
    const double lik = -0.5 * TL1 * z - 0.5 * ss * std::exp(-z);
    const GaussianMoments gp = gp_conditional(s.site.z_sig2, s.hyper.z_sig2_mean,
                                              s.hyper.sig2_z_sig2, corr(Field::ZSig2, s), i);
    return lik + normal_logpdf(z, gp.mean, gp.var);
  }
  throw Error("mh_logtarget_site: field has a Gaussian conditional");
}

double GibbsSampler::mh_logtarget_global(Field which, double z, const ModelState& s,
                                         const ResidualWorkspace& ws) const {
  const int I = data_.I();
  const double TL1 = double(data_.T) * (data_.L - 1);
  if (which == Field::ZRho) {
    const double rho_z = std::tanh(0.5 * z);
    double lik = 0.0;
    for (int i = 0; i < I; ++i) {
      lik -= 0.5 * site_ar_ss(i, rho_z, ws) / s.site.sig2(i);
    }
    return lik + normal_logpdf(z, priors_.z_rho_mean.mean,
                               priors_.z_rho_mean.sd * priors_.z_rho_mean.sd);
  }
  if (which == Field::ZSig2) {
    double ss = 0.0;
    for (int i = 0; i < I; ++i) ss += site_ar_ss(i, s.site.rho(i), ws);
    const double lik = -0.5 * TL1 * I * z - 0.5 * ss * std::exp(-z);
    return lik + normal_logpdf(z, priors_.z_sig2_mean.mean,
                               priors_.z_sig2_mean.sd * priors_.z_sig2_mean.sd);
  }
  throw Error("mh_logtarget_global: field has a Gaussian conditional");
}

std::vector<double> GibbsSampler::phi_logweights(Field which, const ModelState& s) const {
  if (opts_.phi_mode != PhiMode::Grid) {
    throw Error("phi_logweights: decay parameters are fixed");
  }
  const arma::vec* field = nullptr;
  double mean = 0.0, sig2 = 1.0;
  switch (which) {
    case Field::Beta0:
      field = &s.site.beta0_tilde;
      mean = s.fixed.beta0;
      sig2 = s.hyper.sig2_beta0;
      break;
    case Field::Alpha:
      field = &s.site.alpha_tilde;
      mean = s.fixed.alpha;
      sig2 = s.hyper.sig2_alpha;
      break;
    case Field::ZRho:
      field = &s.site.z_rho;
      mean = s.hyper.z_rho_mean;
      sig2 = s.hyper.sig2_z_rho;
      break;
    case Field::ZSig2:
      field = &s.site.z_sig2;
      mean = s.hyper.z_sig2_mean;
      sig2 = s.hyper.sig2_z_sig2;
      break;
  }
  std::vector<double> logw(corr_grid_.size());
  for (std::size_t k = 0; k < corr_grid_.size(); ++k) {
    const double q = centered_quadform(*field, mean, corr_grid_[k]);
    logw[k] = -0.5 * corr_grid_[k].log_det - 0.5 * q / sig2;
  }
  return logw;
}

// ---------------------------------------------------------------------------
// Update kernels
// ---------------------------------------------------------------------------

void GibbsSampler::update_global_means(ModelState& s, ResidualWorkspace& ws,
                                       MhTuner& tuner, Rng& rng) const {
  const int T = data_.T, L = data_.L, I = data_.I();

  GaussianMoments fc = fc_global_mean(Field::Beta0, s);
  s.fixed.beta0 = rng.normal(fc.mean, std::sqrt(fc.var));
  if (!opts_.variant.gp_beta0) s.site.beta0_tilde.fill(s.fixed.beta0);

  fc = fc_global_mean(Field::Alpha, s);
  s.fixed.alpha = rng.normal(fc.mean, std::sqrt(fc.var));
  if (!opts_.variant.gp_alpha) s.site.alpha_tilde.fill(s.fixed.alpha);

  auto draw_coef = [&](Coef which, double& coef, auto regressor) {
    const GaussianMoments m = fc_fixed_effect(which, s, ws);
    const double next = rng.normal(m.mean, std::sqrt(m.var));
    const double delta = next - coef;
    coef = next;
    for (int t = 0; t < T; ++t) {
      for (int l = 0; l < L; ++l) {
        for (int i = 0; i < I; ++i) ws.x(t, l, i) -= delta * regressor(l, i);
      }
    }
  };
  draw_coef(Coef::Beta1, s.fixed.beta1, [this](int l, int) { return design_.sc[l]; });
  draw_coef(Coef::Beta2, s.fixed.beta2, [this](int l, int) { return design_.cc[l]; });
  if (design_.include_elevation) {
    draw_coef(Coef::Beta3, s.fixed.beta3, [this](int, int i) { return design_.ec[i]; });
  }

  if (opts_.variant.gp_z_rho) {
    fc = fc_global_mean(Field::ZRho, s);
    s.hyper.z_rho_mean = rng.normal(fc.mean, std::sqrt(fc.var));
  } else {
    const double z = s.hyper.z_rho_mean;
    const double prop = z + tuner.sd_z_rho[0] * rng.normal();
    const double logr = mh_logtarget_global(Field::ZRho, prop, s, ws) -
                        mh_logtarget_global(Field::ZRho, z, s, ws);
    const bool accept = std::log(rng.uniform()) < logr;
    if (accept) {
      s.hyper.z_rho_mean = prop;
      s.site.z_rho.fill(prop);
    }
    tuner.count_rho(0, accept);
  }

  if (opts_.variant.gp_z_sig2) {
    fc = fc_global_mean(Field::ZSig2, s);
    s.hyper.z_sig2_mean = rng.normal(fc.mean, std::sqrt(fc.var));
  } else {
    const double z = s.hyper.z_sig2_mean;
    const double prop = z + tuner.sd_z_sig2[0] * rng.normal();
    const double logr = mh_logtarget_global(Field::ZSig2, prop, s, ws) -
                        mh_logtarget_global(Field::ZSig2, z, s, ws);
    const bool accept = std::log(rng.uniform()) < logr;
    if (accept) {
      s.hyper.z_sig2_mean = prop;
      s.site.z_sig2.fill(prop);
    }
    tuner.count_sig(0, accept);
  }
}

void GibbsSampler::update_rho_psi(ModelState& s, Rng& rng) const {
  if (opts_.pin_rho_psi_zero) return;
  const TruncGaussian fc = fc_rho_psi(s);
  s.hyper.rho_psi = fc.informative
                        ? rng.trunc_normal(fc.mean, std::sqrt(fc.var), fc.lower, fc.upper)
                        : rng.uniform(fc.lower, fc.upper);
}

void GibbsSampler::update_variances(ModelState& s, Rng& rng) const {
  GammaMoments g = fc_precision(Var::Lambda, s);
  s.hyper.sig2_lambda = 1.0 / rng.gamma(g.shape, g.rate);
  g = fc_precision(Var::Eta, s);
  s.hyper.sig2_eta = 1.0 / rng.gamma(g.shape, g.rate);
  if (opts_.variant.gp_beta0) {
    g = fc_precision(Var::Beta0, s);
    s.hyper.sig2_beta0 = 1.0 / rng.gamma(g.shape, g.rate);
  }
  if (opts_.variant.gp_alpha) {
    g = fc_precision(Var::Alpha, s);
    s.hyper.sig2_alpha = 1.0 / rng.gamma(g.shape, g.rate);
  }
  if (opts_.variant.gp_z_rho) {
    g = fc_precision(Var::ZRho, s);
    s.hyper.sig2_z_rho = 1.0 / rng.gamma(g.shape, g.rate);
  }
  if (opts_.variant.gp_z_sig2) {
    g = fc_precision(Var::ZSig2, s);
    s.hyper.sig2_z_sig2 = 1.0 / rng.gamma(g.shape, g.rate);
  }
}

void GibbsSampler::update_phi_discrete(ModelState& s, Rng& rng) const {
  if (opts_.phi_mode != PhiMode::Grid) return;
  auto draw = [&](Field f, double& phi, int& idx) {
    const std::vector<double> logw = phi_logweights(f, s);
    idx = static_cast<int>(rng.categorical_logits(logw));
    phi = phi_grid_[idx];
  };
  if (opts_.variant.gp_beta0) draw(Field::Beta0, s.hyper.phi_beta0, s.hyper.phi_idx_beta0);
  if (opts_.variant.gp_alpha) draw(Field::Alpha, s.hyper.phi_alpha, s.hyper.phi_idx_alpha);
  if (opts_.variant.gp_z_rho) draw(Field::ZRho, s.hyper.phi_z_rho, s.hyper.phi_idx_z_rho);
  if (opts_.variant.gp_z_sig2) {
    draw(Field::ZSig2, s.hyper.phi_z_sig2, s.hyper.phi_idx_z_sig2);
  }
}

void GibbsSampler::update_site_gaussian_fields(ModelState& s, Rng& rng) const {
  const int I = data_.I();
  if (opts_.variant.gp_beta0) {
    for (int i = 0; i < I; ++i) {
      const GaussianMoments m = fc_site_field(Field::Beta0, i, s);
      s.site.beta0_tilde[i] = rng.normal(m.mean, std::sqrt(m.var));
    }
  }
  if (opts_.variant.gp_alpha) {
    for (int i = 0; i < I; ++i) {
      const GaussianMoments m = fc_site_field(Field::Alpha, i, s);
      s.site.alpha_tilde[i] = rng.normal(m.mean, std::sqrt(m.var));
    }
  }
}

void GibbsSampler::update_site_latents_mh(ModelState& s, ResidualWorkspace& ws,
                                          MhTuner& tuner, Rng& rng) const {
  const int I = data_.I();
  if (opts_.variant.gp_z_rho) {
    for (int i = 0; i < I; ++i) {
      const double z = s.site.z_rho[i];
      const double prop = z + tuner.sd_z_rho[i] * rng.normal();
      const double logr = mh_logtarget_site(Field::ZRho, i, prop, s, ws) -
                          mh_logtarget_site(Field::ZRho, i, z, s, ws);
      const bool accept = std::log(rng.uniform()) < logr;
      if (accept) s.site.z_rho[i] = prop;
      tuner.count_rho(i, accept);
    }
  }
  if (opts_.variant.gp_z_sig2) {
    for (int i = 0; i < I; ++i) {
      const double z = s.site.z_sig2[i];
      const double prop = z + tuner.sd_z_sig2[i] * rng.normal();
      const double logr = mh_logtarget_site(Field::ZSig2, i, prop, s, ws) -
                          mh_logtarget_site(Field::ZSig2, i, z, s, ws);
      const bool accept = std::log(rng.uniform()) < logr;
      if (accept) s.site.z_sig2[i] = prop;
      tuner.count_sig(i, accept);
    }
  }
}

void GibbsSampler::update_psi(ModelState& s, Rng& rng) const {
  // psi_1 stays at zero for identifiability.
  for (int t = 1; t < data_.T; ++t) {
    const GaussianMoments m = fc_psi(t, s);
    s.temporal.psi[t] = rng.normal(m.mean, std::sqrt(m.var));
  }
}

void GibbsSampler::update_gamma(ModelState& s, ResidualWorkspace& ws, Rng& rng) const {
  const int T = data_.T, L = data_.L, I = data_.I();
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < I; ++i) {
      const GaussianMoments m = fc_gamma(t, i, s, ws);
      const double next = rng.normal(m.mean, std::sqrt(m.var));
      const double delta = next - s.temporal.gamma(t, i);
      s.temporal.gamma(t, i) = next;
      for (int l = 0; l < L; ++l) ws.x(t, l, i) -= delta;
    }
  }
}

void GibbsSampler::gibbs_sweep(ModelState& s, ResidualWorkspace& ws, MhTuner& tuner,
                               Rng& rng) const {
  update_global_means(s, ws, tuner, rng);
  update_rho_psi(s, rng);
  update_variances(s, rng);
  update_phi_discrete(s, rng);
  update_site_gaussian_fields(s, rng);
  update_site_latents_mh(s, ws, tuner, rng);
  update_psi(s, rng);
  update_gamma(s, ws, rng);
}

// ---------------------------------------------------------------------------
// Joint density
// ---------------------------------------------------------------------------

double GibbsSampler::log_joint(const ModelState& s, const ResidualWorkspace& ws) const {
  const int T = data_.T, L = data_.L, I = data_.I();
  double lp = 0.0;

  for (int i = 0; i < I; ++i) {
    const double rho = s.site.rho(i);
    const double s2 = s.site.sig2(i);
    const double ss = site_ar_ss(i, rho, ws);
    lp += -0.5 * double(T) * (L - 1) * std::log(2.0 * M_PI * s2) - 0.5 * ss / s2;
  }
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < I; ++i) {
      const double mean = s.site.beta0_tilde[i] +
                          s.site.alpha_tilde[i] * design_.tc[t] + s.temporal.psi[t];
      lp += normal_logpdf(s.temporal.gamma(t, i), mean, s.hyper.sig2_eta);
    }
  }
  for (int t = 1; t < T; ++t) {
    lp += normal_logpdf(s.temporal.psi[t], s.hyper.rho_psi * s.temporal.psi[t - 1],
                        s.hyper.sig2_lambda);
  }
  if (opts_.variant.gp_beta0) {
    lp += mvn_logpdf_centered(s.site.beta0_tilde, s.fixed.beta0, s.hyper.sig2_beta0,
                              corr(Field::Beta0, s));
    lp += ig_logpdf(s.hyper.sig2_beta0, priors_.sig2_beta0.a, priors_.sig2_beta0.b);
  }
  if (opts_.variant.gp_alpha) {
    lp += mvn_logpdf_centered(s.site.alpha_tilde, s.fixed.alpha, s.hyper.sig2_alpha,
                              corr(Field::Alpha, s));
    lp += ig_logpdf(s.hyper.sig2_alpha, priors_.sig2_alpha.a, priors_.sig2_alpha.b);
  }
  if (opts_.variant.gp_z_rho) {
    lp += mvn_logpdf_centered(s.site.z_rho, s.hyper.z_rho_mean, s.hyper.sig2_z_rho,
                              corr(Field::ZRho, s));
    lp += ig_logpdf(s.hyper.sig2_z_rho, priors_.sig2_z_rho.a, priors_.sig2_z_rho.b);
  }
  if (opts_.variant.gp_z_sig2) {
    lp += mvn_logpdf_centered(s.site.z_sig2, s.hyper.z_sig2_mean, s.hyper.sig2_z_sig2,
                              corr(Field::ZSig2, s));
    lp += ig_logpdf(s.hyper.sig2_z_sig2, priors_.sig2_z_sig2.a, priors_.sig2_z_sig2.b);
  }
  auto nprior = [](double x, const GaussianPrior& g) {
    return normal_logpdf(x, g.mean, g.sd * g.sd);
  };
  lp += nprior(s.fixed.beta0, priors_.beta0);
  lp += nprior(s.fixed.alpha, priors_.alpha);
  lp += nprior(s.fixed.beta1, priors_.beta1);
  lp += nprior(s.fixed.beta2, priors_.beta2);
  if (design_.include_elevation) lp += nprior(s.fixed.beta3, priors_.beta3);
  lp += nprior(s.hyper.z_rho_mean, priors_.z_rho_mean);
  lp += nprior(s.hyper.z_sig2_mean, priors_.z_sig2_mean);
  lp += ig_logpdf(s.hyper.sig2_lambda, priors_.sig2_lambda.a, priors_.sig2_lambda.b);
  lp += ig_logpdf(s.hyper.sig2_eta, priors_.sig2_eta.a, priors_.sig2_eta.b);
  if (!opts_.pin_rho_psi_zero) {
    if (s.hyper.rho_psi <= priors_.rho_psi_lower ||
        s.hyper.rho_psi >= priors_.rho_psi_upper) {
      return -std::numeric_limits<double>::infinity();
    }
    lp -= std::log(priors_.rho_psi_upper - priors_.rho_psi_lower);
  }
  if (opts_.phi_mode == PhiMode::Grid) {
    const double logn = std::log(double(phi_grid_.size()));
    if (opts_.variant.gp_beta0) lp -= logn;
    if (opts_.variant.gp_alpha) lp -= logn;
    if (opts_.variant.gp_z_rho) lp -= logn;
    if (opts_.variant.gp_z_sig2) lp -= logn;
  }
  return lp;
}

// ---------------------------------------------------------------------------
// Chain runner
// ---------------------------------------------------------------------------

ChainOutput run_chain(const PanelDataset& data, const HyperPriors& priors,
                      const FitOptions& opts, const ChainConfig& cfg) {
  if (cfg.burn_in >= cfg.iterations && cfg.burn_in != cfg.iterations) {
    throw DataError("run_chain: burn-in must not exceed iterations");
  }
  if (cfg.thin < 1) throw DataError("run_chain: thin must be >= 1");
  data.validate();
  if (!data.fit_ready()) {
    throw DataError("run_chain: panel has missing values; apply a drop rule or impute "
                    "after fitting");
  }
  const Design design =
      build_design(data, opts.scaling, opts.day_offset, opts.include_elevation);
  GibbsSampler sampler(data, design, priors, opts);

  std::vector<std::string> ids;
  for (const auto& s : data.sites) ids.push_back(s.id);
  ChainOutput out;
  out.layout = ParamLayout::create(opts.variant, opts, data.T, data.I(), ids);
  out.seed = cfg.seed;
  out.iterations = cfg.iterations;
  out.burn_in = cfg.burn_in;
  out.thin = cfg.thin;
  out.meta.sites = data.sites;
  out.meta.T = data.T;
  out.meta.L = data.L;
  out.meta.first_year = data.first_year;
  out.meta.variant = opts.variant;
  out.meta.pin_rho_psi_zero = opts.pin_rho_psi_zero;
  out.meta.include_elevation = opts.include_elevation;
  out.meta.scaling_policy = opts.scaling;
  out.meta.day_offset = opts.day_offset;
  out.meta.scaling = design.scaling;
  out.meta.phi_mode = opts.phi_mode;
  out.meta.phi_fixed = sampler.phi_fixed_value();
  out.meta.phi_grid = sampler.phi_grid();

  const long n_keep = (cfg.iterations - cfg.burn_in) / cfg.thin;
  out.draws.set_size(n_keep, out.layout.size());
  out.iteration_numbers.reserve(n_keep);

  Rng rng(cfg.seed);
  ModelState state = sampler.initial_state();
  ResidualWorkspace ws = sampler.make_workspace(state);
  MhTuner tuner = sampler.make_tuner();
  if (cfg.burn_in == 0) tuner.freeze();

  long stored = 0;
  for (long b = 1; b <= cfg.iterations; ++b) {
    sampler.gibbs_sweep(state, ws, tuner, rng);
    if (tuner.adapting && b % tuner.window == 0) tuner.adapt();
    if (b == cfg.burn_in) tuner.freeze();
    if (b > cfg.burn_in && (b - cfg.burn_in) % cfg.thin == 0 && stored < n_keep) {
      if (!state.finite()) {
        throw NumericError("run_chain: non-finite state at iteration " +
                           std::to_string(b));
      }
      out.draws.row(stored) = pack_state(out.layout, state);
      out.iteration_numbers.push_back(b);
      ++stored;
    }
  }

  auto rates = [](const arma::uvec& acc, const arma::uvec& tries) {
    arma::vec r(acc.n_elem, arma::fill::zeros);
    for (std::size_t k = 0; k < acc.n_elem; ++k) {
      if (tries[k] > 0) r[k] = double(acc[k]) / double(tries[k]);
    }
    return r;
  };
  out.acceptance.rate_z_rho = rates(tuner.post_acc_rho, tuner.post_try_rho);
  out.acceptance.rate_z_sig2 = rates(tuner.post_acc_sig, tuner.post_try_sig);
  out.acceptance.overall_z_rho =
      arma::accu(tuner.post_try_rho) > 0
          ? double(arma::accu(tuner.post_acc_rho)) / double(arma::accu(tuner.post_try_rho))
          : 0.0;
  out.acceptance.overall_z_sig2 =
      arma::accu(tuner.post_try_sig) > 0
          ? double(arma::accu(tuner.post_acc_sig)) / double(arma::accu(tuner.post_try_sig))
          : 0.0;
  out.acceptance.counted_iterations = cfg.iterations - cfg.burn_in;
  return out;
}

std::vector<ChainOutput> fit_chains(const PanelDataset& data, const HyperPriors& priors,
                                    const FitOptions& opts, const ChainConfig& cfg,
                                    int n_chains) {
  if (n_chains < 1) throw DataError("fit_chains: need at least one chain");
  std::vector<ChainOutput> out(n_chains);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < n_chains; ++c) {
    try {
      ChainConfig cc = cfg;
      cc.seed = cfg.seed ^ static_cast<std::uint64_t>(c);
      out[c] = run_chain(data, priors, opts, cc);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace daymax
