#include "daymax/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace daymax {

void PanelDataset::validate() const {
  const std::size_t n = static_cast<std::size_t>(T) * L * sites.size();
  if (values.size() != n || miss.size() != n) {
    throw DataError("panel: array dims inconsistent with T, L, I");
  }
  std::set<std::string> ids;
  for (const auto& s : sites) {
    if (!ids.insert(s.id).second) throw DataError("panel: duplicate site id " + s.id);
    if (!std::isfinite(s.x) || !std::isfinite(s.y)) {
      throw DataError("panel: non-finite coordinates for site " + s.id);
    }
    if (s.elev < -500.0 || s.elev > 9000.0) {
      throw DataError("panel: elevation out of range for site " + s.id);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (miss[k]) continue;
    if (!std::isfinite(values[k]) || values[k] < -60.0 || values[k] > 60.0) {
      throw DataError("panel: non-missing value outside [-60, 60] degC");
    }
  }
}

bool PanelDataset::fit_ready() const {
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < I(); ++i) {
      for (int l = 0; l < L; ++l) {
        if (missing(t, l, i)) return false;
      }
    }
  }
  return T > 0 && L > 0 && I() > 0;
}

PanelDataset PanelDataset::drop_incomplete_years() const {
  std::vector<int> keep;
  for (int t = 0; t < T; ++t) {
    bool complete = true;
    for (int l = 0; l < L && complete; ++l) {
      for (int i = 0; i < I(); ++i) {
        if (missing(t, l, i)) {
          complete = false;
          break;
        }
      }
    }
    if (complete) keep.push_back(t);
  }
  PanelDataset out;
  out.sites = sites;
  out.T = static_cast<int>(keep.size());
  out.L = L;
  out.first_year = first_year;
  out.values.resize(static_cast<std::size_t>(out.T) * L * sites.size());
  out.miss.resize(out.values.size());
  for (int tt = 0; tt < out.T; ++tt) {
    const int t = keep[tt];
    for (int l = 0; l < L; ++l) {
      for (int i = 0; i < I(); ++i) {
        out.values[out.idx(tt, l, i)] = value(t, l, i);
        out.miss[out.idx(tt, l, i)] = miss[idx(t, l, i)];
      }
    }
  }
  return out;
}

PanelDataset PanelDataset::drop_site(int drop) const {
  if (drop < 0 || drop >= I()) throw DataError("drop_site: index out of range");
  PanelDataset out;
  out.T = T;
  out.L = L;
  out.first_year = first_year;
  for (int i = 0; i < I(); ++i) {
    if (i != drop) out.sites.push_back(sites[i]);
  }
  out.values.resize(static_cast<std::size_t>(T) * L * out.sites.size());
  out.miss.resize(out.values.size());
  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < L; ++l) {
      int j = 0;
      for (int i = 0; i < I(); ++i) {
        if (i == drop) continue;
        out.values[out.idx(t, l, j)] = value(t, l, i);
        out.miss[out.idx(t, l, j)] = miss[idx(t, l, i)];
        ++j;
      }
    }
  }
  return out;
}

int PanelDataset::site_index(const std::string& id) const {
  for (int i = 0; i < I(); ++i) {
    if (sites[i].id == id) return i;
  }
  throw DataError("unknown site id: " + id);
}

bool ModelState::finite() const {
  auto ok = [](double x) { return std::isfinite(x); };
  if (!ok(fixed.beta0) || !ok(fixed.alpha) || !ok(fixed.beta1) || !ok(fixed.beta2) ||
      !ok(fixed.beta3)) {
    return false;
  }
  if (!site.beta0_tilde.is_finite() || !site.alpha_tilde.is_finite() ||
      !site.z_rho.is_finite() || !site.z_sig2.is_finite()) {
    return false;
  }
  if (!temporal.psi.is_finite() || !temporal.gamma.is_finite()) return false;
  const HyperState& h = hyper;
  return ok(h.rho_psi) && h.sig2_lambda > 0 && h.sig2_eta > 0 && h.sig2_beta0 > 0 &&
         h.sig2_alpha > 0 && h.sig2_z_rho > 0 && h.sig2_z_sig2 > 0 &&
         ok(h.z_rho_mean) && ok(h.z_sig2_mean) && std::abs(h.rho_psi) < 1.0;
}

void HyperPriors::validate() const {
  for (const GaussianPrior* g :
       {&beta0, &alpha, &beta1, &beta2, &beta3, &z_rho_mean, &z_sig2_mean}) {
    if (!(g->sd > 0.0) || !std::isfinite(g->sd) || !std::isfinite(g->mean)) {
      throw DataError("priors: Gaussian prior requires finite mean and sd > 0");
    }
  }
  for (const InvGammaPrior* ig :
       {&sig2_lambda, &sig2_eta, &sig2_beta0, &sig2_alpha, &sig2_z_rho, &sig2_z_sig2}) {
    if (!(ig->a > 0.0) || !(ig->b > 0.0)) {
      throw DataError("priors: inverse-gamma shape/rate must be positive");
    }
  }
  if (!(rho_psi_lower < rho_psi_upper)) {
    throw DataError("priors: rho_psi truncation requires lower < upper");
  }
  for (double phi : phi_grid) {
    if (!(phi > 0.0)) throw DataError("priors: decay grid values must be positive");
  }
}

namespace {

// Sample standard deviation; 1 when degenerate so scaling stays invertible.
double scale_of(const arma::vec& v) {
  if (v.n_elem < 2) return 1.0;
  const double s = arma::stddev(v);  // n-1 denominator
  return s > 0.0 ? s : 1.0;
}

}  // namespace

Design build_design(int T, int L, const std::vector<SiteMeta>& sites,
                    ScalingPolicy policy, int day_offset, bool include_elevation) {
  if (T <= 0 || L <= 0 || sites.empty()) {
    throw DataError("build_design: empty panel");
  }
  Design d;
  d.T = T;
  d.L = L;
  d.day_offset = day_offset;
  d.policy = policy;
  d.include_elevation = include_elevation;

  d.sin_raw.set_size(L);
  d.cos_raw.set_size(L);
  for (int l = 0; l < L; ++l) {
    const double arg = 2.0 * M_PI * (l + 1 + day_offset) / 365.0;
    d.sin_raw[l] = std::sin(arg);
    d.cos_raw[l] = std::cos(arg);
  }
  arma::vec years(T);
  for (int t = 0; t < T; ++t) years[t] = t + 1;
  arma::vec elev(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) elev[i] = sites[i].elev;

  if (policy != ScalingPolicy::None) {
    d.scaling.t_center = arma::mean(years);
    d.scaling.sin_center = arma::mean(d.sin_raw);
    d.scaling.cos_center = arma::mean(d.cos_raw);
    d.scaling.elev_center = arma::mean(elev);
  }
  if (policy == ScalingPolicy::Standardize) {
    d.scaling.t_scale = scale_of(years);
    d.scaling.sin_scale = scale_of(d.sin_raw);
    d.scaling.cos_scale = scale_of(d.cos_raw);
    d.scaling.elev_scale = scale_of(elev);
  }
  d.tc = (years - d.scaling.t_center) / d.scaling.t_scale;
  d.sc = (d.sin_raw - d.scaling.sin_center) / d.scaling.sin_scale;
  d.cc = (d.cos_raw - d.scaling.cos_center) / d.scaling.cos_scale;
  d.ec = (elev - d.scaling.elev_center) / d.scaling.elev_scale;
  return d;
}

Design build_design(const PanelDataset& data, ScalingPolicy policy, int day_offset,
                    bool include_elevation) {
  return build_design(data.T, data.L, data.sites, policy, day_offset, include_elevation);
}

double seasonal_mean(const Design& d, const FixedEffects& f, int l, double elev_scaled) {
  return f.beta1 * d.sc[l] + f.beta2 * d.cc[l] +
         (d.include_elevation ? f.beta3 * elev_scaled : 0.0);
}

ModelVariant ModelVariant::parse(const std::string& text) {
  if (text.empty() || (text[0] != 'M' && text[0] != 'm')) {
    throw DataError("variant: expected M<p>[:fields], got '" + text + "'");
  }
  const auto colon = text.find(':');
  const std::string head = text.substr(1, colon == std::string::npos
                                              ? std::string::npos
                                              : colon - 1);
  int p = 0;
  try {
    p = std::stoi(head);
  } catch (const std::exception&) {
    throw DataError("variant: bad process count in '" + text + "'");
  }
  if (p < 0 || p > 4) throw DataError("variant: process count must be 0..4");
  ModelVariant v = ModelVariant::none();
  if (p == 0) {
    if (colon != std::string::npos) throw DataError("variant: M0 takes no field list");
    return v;
  }
  if (p == 4) {
    if (colon != std::string::npos) throw DataError("variant: M4 takes no field list");
    return ModelVariant::all();
  }
  if (colon == std::string::npos) {
    throw DataError("variant: M" + std::to_string(p) + " needs a field list");
  }
  std::stringstream ss(text.substr(colon + 1));
  std::string tok;
  int count = 0;
  while (std::getline(ss, tok, ',')) {
    if (tok == "beta0") {
      v.gp_beta0 = true;
    } else if (tok == "alpha") {
      v.gp_alpha = true;
    } else if (tok == "rho") {
      v.gp_z_rho = true;
    } else if (tok == "sigma") {
      v.gp_z_sig2 = true;
    } else {
      throw DataError("variant: unknown field '" + tok +
                      "' (expected beta0, alpha, rho, sigma)");
    }
    ++count;
  }
  if (count != p || v.n_processes() != p) {
    throw DataError("variant: field list does not match process count in '" + text + "'");
  }
  return v;
}

std::string ModelVariant::to_string() const {
  const int p = n_processes();
  if (p == 0) return "M0";
  if (p == 4) return "M4";
  std::string fields;
  auto add = [&fields](const char* name) {
    if (!fields.empty()) fields += ',';
    fields += name;
  };
  if (gp_beta0) add("beta0");
  if (gp_alpha) add("alpha");
  if (gp_z_rho) add("rho");
  if (gp_z_sig2) add("sigma");
  return "M" + std::to_string(p) + ":" + fields;
}

}  // namespace daymax
