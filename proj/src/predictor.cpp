#include "daymax/predictor.hpp"

#include <algorithm>
#include <cmath>

namespace daymax {

double quantile_type7(arma::vec x, double p) {
  if (x.n_elem == 0) throw DataError("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DataError("quantile: p outside [0, 1]");
  x = arma::sort(x);
  const double h = (double(x.n_elem) - 1.0) * p;
  const arma::uword lo = static_cast<arma::uword>(std::floor(h));
  if (lo + 1 >= x.n_elem) return x[x.n_elem - 1];
  return x[lo] + (h - double(lo)) * (x[lo + 1] - x[lo]);
}

arma::vec PredictiveSamples::cell_mean() const {
  return arma::mean(replicates, 0).t();
}

arma::vec PredictiveSamples::cell_lower() const {
  arma::vec out(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    out[c] = quantile_type7(replicates.col(c), 0.05);
  }
  return out;
}

arma::vec PredictiveSamples::cell_upper() const {
  arma::vec out(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    out[c] = quantile_type7(replicates.col(c), 0.95);
  }
  return out;
}

Design design_from_meta(const FitMeta& meta) {
  Design d = build_design(meta.T, meta.L, meta.sites, ScalingPolicy::None,
                          meta.day_offset, meta.include_elevation);
  d.policy = meta.scaling_policy;
  d.scaling = meta.scaling;
  arma::vec years(meta.T);
  for (int t = 0; t < meta.T; ++t) years[t] = t + 1;
  arma::vec elev(meta.sites.size());
  for (std::size_t i = 0; i < meta.sites.size(); ++i) elev[i] = meta.sites[i].elev;
  d.tc = (years - d.scaling.t_center) / d.scaling.t_scale;
  d.sc = (d.sin_raw - d.scaling.sin_center) / d.scaling.sin_scale;
  d.cc = (d.cos_raw - d.scaling.cos_center) / d.scaling.cos_scale;
  d.ec = (elev - d.scaling.elev_center) / d.scaling.elev_scale;
  return d;
}

FieldKriger::FieldKriger(const std::vector<SiteMeta>& sites, double x, double y,
                         double phi) {
  const int n = static_cast<int>(sites.size());
  arma::vec r0(n);
  for (int i = 0; i < n; ++i) {
    const double d = std::hypot(sites[i].x - x, sites[i].y - y);
    if (d < 1e-9) coincident_ = i;
    r0[i] = std::exp(-phi * d);
  }
  if (coincident_ >= 0) return;
  const CorrelationMatrix R = exp_correlation(sites, phi);
  k_ = R.Rinv * r0;
  c_ = arma::dot(r0, k_);
  sum_k_ = arma::accu(k_);
}

GaussianMoments FieldKriger::conditional(const arma::vec& w, double mean,
                                         double sig2) const {
  if (coincident_ >= 0) return {w[coincident_], 0.0};
  GaussianMoments g;
  g.mean = mean + arma::dot(k_, w) - mean * sum_k_;
  g.var = sig2 * (1.0 - c_);
  if (g.var < 0.0) {
    if (g.var < -1e-12 * std::max(1.0, sig2)) {
      throw NumericError("kriging: negative conditional variance");
    }
    g.var = 0.0;
  }
  return g;
}

long total_draws(const std::vector<ChainOutput>& chains) {
  long n = 0;
  for (const auto& c : chains) n += c.n_draws();
  return n;
}

namespace {

// Global draw index -> (chain, row), chain-major.
std::pair<const ChainOutput*, long> locate_draw(const std::vector<ChainOutput>& chains,
                                                long b) {
  for (const auto& c : chains) {
    if (b < c.n_draws()) return {&c, b};
    b -= c.n_draws();
  }
  throw DataError("draw index out of range");
}

std::vector<long> select_draws(const std::vector<ChainOutput>& chains, long B) {
  const long total = total_draws(chains);
  if (total == 0) throw DataError("posterior holds no draws");
  if (B <= 0 || B == total) {
    std::vector<long> idx(total);
    for (long k = 0; k < total; ++k) idx[k] = k;
    return idx;
  }
  if (B > total) {
    throw DataError("requested more replicates than retained posterior draws");
  }
  const long stride = total / B;
  std::vector<long> idx(B);
  for (long k = 0; k < B; ++k) idx[k] = k * stride;
  return idx;
}

// Kriging weights for every decay value a fit can carry.
class KrigerCache {
 public:
  KrigerCache(const FitMeta& meta, double x, double y) {
    if (meta.phi_mode == PhiMode::Grid) {
      for (double phi : meta.phi_grid) {
        krigers_.emplace(phi, FieldKriger(meta.sites, x, y, phi));
      }
    } else {
      krigers_.emplace(meta.phi_fixed, FieldKriger(meta.sites, x, y, meta.phi_fixed));
    }
  }
  const FieldKriger& at(double phi) const {
    const auto it = krigers_.find(phi);
    if (it == krigers_.end()) throw Error("kriging: decay value not in cache");
    return it->second;
  }

 private:
  std::map<double, FieldKriger> krigers_;
};

struct SiteDraw {
  double beta0_tilde = 0.0;
  double alpha_tilde = 0.0;
  double rho = 0.0;
  double sig2 = 1.0;
};

double krige_one(const FieldKriger& kriger, const arma::vec& field, double mean,
                 double sig2, Rng& rng) {
  const GaussianMoments g = kriger.conditional(field, mean, sig2);
  if (g.var == 0.0) return g.mean;
  return g.mean + std::sqrt(g.var) * rng.normal();
}

// The four process values at the target point for one posterior draw.
// fit_idx >= 0 reproduces the stored values at an observed site exactly.
SiteDraw draw_site_fields(const ModelState& st, const ModelVariant& variant,
                          const KrigerCache& cache, int fit_idx, Rng& rng) {
  SiteDraw out;
  if (fit_idx >= 0) {
    out.beta0_tilde = st.site.beta0_tilde[fit_idx];
    out.alpha_tilde = st.site.alpha_tilde[fit_idx];
    out.rho = std::tanh(0.5 * st.site.z_rho[fit_idx]);
    out.sig2 = std::exp(st.site.z_sig2[fit_idx]);
    return out;
  }
  out.beta0_tilde =
      variant.gp_beta0
          ? krige_one(cache.at(st.hyper.phi_beta0), st.site.beta0_tilde, st.fixed.beta0,
                      st.hyper.sig2_beta0, rng)
          : st.fixed.beta0;
  out.alpha_tilde =
      variant.gp_alpha
          ? krige_one(cache.at(st.hyper.phi_alpha), st.site.alpha_tilde, st.fixed.alpha,
                      st.hyper.sig2_alpha, rng)
          : st.fixed.alpha;
  const double z_rho =
      variant.gp_z_rho
          ? krige_one(cache.at(st.hyper.phi_z_rho), st.site.z_rho, st.hyper.z_rho_mean,
                      st.hyper.sig2_z_rho, rng)
          : st.hyper.z_rho_mean;
  const double z_sig2 =
      variant.gp_z_sig2
          ? krige_one(cache.at(st.hyper.phi_z_sig2), st.site.z_sig2,
                      st.hyper.z_sig2_mean, st.hyper.sig2_z_sig2, rng)
          : st.hyper.z_sig2_mean;
  out.rho = std::tanh(0.5 * z_rho);
  out.sig2 = std::exp(z_sig2);
  return out;
}

int find_fit_site(const FitMeta& meta, double x, double y) {
  for (std::size_t i = 0; i < meta.sites.size(); ++i) {
    if (std::hypot(meta.sites[i].x - x, meta.sites[i].y - y) < 1e-9) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

}  // namespace

arma::vec krige_field_draw(const std::vector<ChainOutput>& chains, Field which,
                           const SiteMeta& s0, const PredictOptions& opts) {
  if (chains.empty()) throw DataError("krige_field_draw: no chains");
  const FitMeta& meta = chains.front().meta;
  const KrigerCache cache(meta, s0.x, s0.y);
  const int fit_idx = find_fit_site(meta, s0.x, s0.y);
  const std::vector<long> idx = select_draws(chains, opts.B);

  arma::vec out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    Rng rng(mix_seed(opts.seed, k));
    const auto [chain, row] = locate_draw(chains, idx[k]);
    const ModelState st = chain->state_at(row);
    const SiteDraw sd = draw_site_fields(st, meta.variant, cache, fit_idx, rng);
    switch (which) {
      case Field::Beta0: out[k] = sd.beta0_tilde; break;
      case Field::Alpha: out[k] = sd.alpha_tilde; break;
      case Field::ZRho: out[k] = sd.rho; break;
      case Field::ZSig2: out[k] = sd.sig2; break;
    }
  }
  return out;
}

double seed_day1(const PanelDataset& data, int year_t, double x, double y) {
  if (year_t < 1 || year_t > data.T) throw DataError("seed_day1: year out of range");
  const int t = year_t - 1;
  std::vector<SiteMeta> obs_sites;
  std::vector<double> obs_values;
  for (int i = 0; i < data.I(); ++i) {
    if (!data.missing(t, 0, i)) {
      obs_sites.push_back(data.sites[i]);
      obs_values.push_back(data.value(t, 0, i));
    }
  }
  if (obs_values.empty()) {
    throw DataError("seed_day1: no observed day-1 values in year " +
                    std::to_string(year_t));
  }
  const int n = static_cast<int>(obs_values.size());
  const arma::vec v(obs_values);
  const double mean_v = arma::mean(v);
  if (n == 1) return v[0];
  const double sill = arma::dot(v - mean_v, v - mean_v) / n;
  const double d_max = max_pairwise_distance(obs_sites);
  if (sill < 1e-12 || d_max <= 0.0) return mean_v;
  const double phi = 3.0 / d_max;

  // Ordinary kriging: weights sum to one via a Lagrange multiplier.
  arma::mat A(n + 1, n + 1, arma::fill::zeros);
  arma::vec rhs(n + 1);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      A(j, k) = sill * std::exp(-phi * site_distance(obs_sites[j], obs_sites[k]));
    }
    A(j, n) = 1.0;
    A(n, j) = 1.0;
    const double d0 = std::hypot(obs_sites[j].x - x, obs_sites[j].y - y);
    rhs[j] = sill * std::exp(-phi * d0);
  }
  rhs[n] = 1.0;
  arma::vec sol;
  if (!arma::solve(sol, A, rhs)) {
    throw NumericError("seed_day1: singular ordinary-kriging system");
  }
  return arma::dot(sol.head(n), v);
}

namespace {

struct ComposeContext {
  const FitMeta* meta;
  Design design;
  ModelVariant variant;
  double ec0 = 0.0;  // scaled elevation of the target
  int fit_idx = -1;
};

double cell_mu(const ComposeContext& ctx, const FixedEffects& f, int l) {
  return seasonal_mean(ctx.design, f, l, ctx.ec0);
}

}  // namespace

PredictiveSamples compose_series(const std::vector<ChainOutput>& chains,
                                 const SiteMeta& s0, int year_t, int through_day,
                                 const PanelDataset& data, const PredictOptions& opts) {
  if (chains.empty()) throw DataError("compose_series: no chains");
  const FitMeta& meta = chains.front().meta;
  if (year_t < 1 || year_t > meta.T) throw DataError("compose_series: year out of range");
  if (through_day < 1 || through_day > meta.L) {
    throw DataError("compose_series: day out of range");
  }
  ComposeContext ctx{&meta, design_from_meta(meta), meta.variant, 0.0,
                     find_fit_site(meta, s0.x, s0.y)};
  ctx.ec0 = ctx.design.elev_scaled(s0.elev);
  const KrigerCache cache(meta, s0.x, s0.y);
  const std::vector<long> idx = select_draws(chains, opts.B);
  const double day1 = seed_day1(data, year_t, s0.x, s0.y);
  const int t = year_t - 1;

  PredictiveSamples out;
  out.site = s0;
  out.T = meta.T;
  out.L = meta.L;
  for (int l = 0; l < through_day; ++l) out.cells.push_back({t, l});
  out.replicates.set_size(idx.size(), out.cells.size());

  const long B = static_cast<long>(idx.size());
#pragma omp parallel for schedule(static) if (opts.parallel)
  for (long k = 0; k < B; ++k) {
    Rng rng(mix_seed(opts.seed, k));
    const auto [chain, row] = locate_draw(chains, idx[k]);
    const ModelState st = chain->state_at(row);
    const SiteDraw sd = draw_site_fields(st, ctx.variant, cache, ctx.fit_idx, rng);
    const double gamma =
        rng.normal(sd.beta0_tilde + sd.alpha_tilde * ctx.design.tc[t] +
                       st.temporal.psi[t],
                   std::sqrt(st.hyper.sig2_eta));
    const double sd_eps = std::sqrt(sd.sig2);
    double prev = day1;
    double prev_mu = cell_mu(ctx, st.fixed, 0) + gamma;
    out.replicates(k, 0) = day1;
    for (int l = 1; l < through_day; ++l) {
      const double mu = cell_mu(ctx, st.fixed, l) + gamma;
      const double y = mu + sd.rho * (prev - prev_mu) + sd_eps * rng.normal();
      out.replicates(k, l) = y;
      prev = y;
      prev_mu = mu;
    }
  }
  return out;
}

PredictiveSamples predict_panel(const std::vector<ChainOutput>& chains,
                                const SiteMeta& s0, const PanelDataset& data,
                                const PredictOptions& opts) {
  if (chains.empty()) throw DataError("predict_panel: no chains");
  const FitMeta& meta = chains.front().meta;
  ComposeContext ctx{&meta, design_from_meta(meta), meta.variant, 0.0,
                     find_fit_site(meta, s0.x, s0.y)};
  ctx.ec0 = ctx.design.elev_scaled(s0.elev);
  const KrigerCache cache(meta, s0.x, s0.y);
  const std::vector<long> idx = select_draws(chains, opts.B);

  std::vector<double> day1(meta.T);
  for (int t = 0; t < meta.T; ++t) day1[t] = seed_day1(data, t + 1, s0.x, s0.y);

  PredictiveSamples out;
  out.site = s0;
  out.T = meta.T;
  out.L = meta.L;
  for (int t = 0; t < meta.T; ++t) {
    for (int l = 0; l < meta.L; ++l) out.cells.push_back({t, l});
  }
  out.replicates.set_size(idx.size(), out.cells.size());

  const long B = static_cast<long>(idx.size());
#pragma omp parallel for schedule(static) if (opts.parallel)
  for (long k = 0; k < B; ++k) {
    Rng rng(mix_seed(opts.seed, k));
    const auto [chain, row] = locate_draw(chains, idx[k]);
    const ModelState st = chain->state_at(row);
    const SiteDraw sd = draw_site_fields(st, ctx.variant, cache, ctx.fit_idx, rng);
    const double sd_eps = std::sqrt(sd.sig2);
    for (int t = 0; t < meta.T; ++t) {
      const double gamma =
          ctx.fit_idx >= 0
              ? st.temporal.gamma(t, ctx.fit_idx)
              : rng.normal(sd.beta0_tilde + sd.alpha_tilde * ctx.design.tc[t] +
                               st.temporal.psi[t],
                           std::sqrt(st.hyper.sig2_eta));
      double prev = day1[t];
      double prev_mu = cell_mu(ctx, st.fixed, 0) + gamma;
      out.replicates(k, static_cast<std::size_t>(t) * meta.L) = prev;
      for (int l = 1; l < meta.L; ++l) {
        const double mu = cell_mu(ctx, st.fixed, l) + gamma;
        const double y = mu + sd.rho * (prev - prev_mu) + sd_eps * rng.normal();
        out.replicates(k, static_cast<std::size_t>(t) * meta.L + l) = y;
        prev = y;
        prev_mu = mu;
      }
    }
  }
  return out;
}

PredictiveSamples impute_missing(const std::vector<ChainOutput>& chains,
                                 const PanelDataset& data, int site_index,
                                 const PredictOptions& opts) {
  if (chains.empty()) throw DataError("impute_missing: no chains");
  if (site_index < 0 || site_index >= data.I()) {
    throw DataError("impute_missing: site index out of range");
  }
  const FitMeta& meta = chains.front().meta;
  if (data.T != meta.T || data.L != meta.L) {
    throw DataError("impute_missing: panel shape differs from the fitted panel");
  }
  const SiteMeta& s0 = data.sites[site_index];
  ComposeContext ctx{&meta, design_from_meta(meta), meta.variant, 0.0,
                     find_fit_site(meta, s0.x, s0.y)};
  ctx.ec0 = ctx.design.elev_scaled(s0.elev);
  const KrigerCache cache(meta, s0.x, s0.y);
  const std::vector<long> idx = select_draws(chains, opts.B);

  PredictiveSamples out;
  out.site = s0;
  out.T = data.T;
  out.L = data.L;
  for (int t = 0; t < data.T; ++t) {
    for (int l = 0; l < data.L; ++l) {
      if (data.missing(t, l, site_index)) out.cells.push_back({t, l});
    }
  }
  out.replicates.set_size(idx.size(), out.cells.size());
  if (out.cells.empty()) return out;

  // Deterministic day-1 seeds for years whose first day is missing.
  std::vector<double> day1(data.T, std::numeric_limits<double>::quiet_NaN());
  for (int t = 0; t < data.T; ++t) {
    day1[t] = data.missing(t, 0, site_index) ? seed_day1(data, t + 1, s0.x, s0.y)
                                             : data.value(t, 0, site_index);
  }

  const long B = static_cast<long>(idx.size());
#pragma omp parallel for schedule(static) if (opts.parallel)
  for (long k = 0; k < B; ++k) {
    Rng rng(mix_seed(opts.seed, k));
    const auto [chain, row] = locate_draw(chains, idx[k]);
    const ModelState st = chain->state_at(row);
    const SiteDraw sd = draw_site_fields(st, ctx.variant, cache, ctx.fit_idx, rng);
    const double sd_eps = std::sqrt(sd.sig2);
    std::size_t cell = 0;
    for (int t = 0; t < data.T; ++t) {
      const double gamma =
          ctx.fit_idx >= 0
              ? st.temporal.gamma(t, ctx.fit_idx)
              : rng.normal(sd.beta0_tilde + sd.alpha_tilde * ctx.design.tc[t] +
                               st.temporal.psi[t],
                           std::sqrt(st.hyper.sig2_eta));
      double prev = day1[t];
      if (data.missing(t, 0, site_index)) {
        out.replicates(k, cell++) = prev;
      }
      double prev_mu = cell_mu(ctx, st.fixed, 0) + gamma;
      for (int l = 1; l < data.L; ++l) {
        const double mu = cell_mu(ctx, st.fixed, l) + gamma;
        double cur;
        if (data.missing(t, l, site_index)) {
          cur = mu + sd.rho * (prev - prev_mu) + sd_eps * rng.normal();
          out.replicates(k, cell++) = cur;
        } else {
          cur = data.value(t, l, site_index);
        }
        prev = cur;
        prev_mu = mu;
      }
    }
  }
  return out;
}

}  // namespace daymax
