#include "daymax/local.hpp"

#include <algorithm>
#include <cmath>

#include "daymax/predictor.hpp"

namespace daymax {

FitOptions local_fit_options(int day_offset) {
  FitOptions opts;
  opts.variant = ModelVariant::none();
  opts.pin_rho_psi_zero = true;  // psi_t iid N(0, sig2_lambda)
  opts.include_elevation = false;
  opts.scaling = ScalingPolicy::None;
  opts.day_offset = day_offset;
  return opts;
}

std::vector<ChainOutput> fit_local(const PanelDataset& data, int site_index,
                                   const HyperPriors& priors, const ChainConfig& cfg,
                                   int n_chains, int day_offset) {
  if (site_index < 0 || site_index >= data.I()) {
    throw DataError("fit_local: site index out of range");
  }
  PanelDataset one = data;
  while (one.I() > 1) {
    const int drop = one.sites[0].id == data.sites[site_index].id ? 1 : 0;
    one = one.drop_site(drop);
  }
  return fit_chains(one, priors, local_fit_options(day_offset), cfg, n_chains);
}

double interval_overlap(double a_lo, double a_hi, double b_lo, double b_hi) {
  const double inter = std::min(a_hi, b_hi) - std::max(a_lo, b_lo);
  const double uni = std::max(a_hi, b_hi) - std::min(a_lo, b_lo);
  if (uni <= 0.0) return a_lo == b_lo ? 1.0 : 0.0;
  return std::max(inter, 0.0) / uni;
}

namespace {

arma::vec merged_column(const std::vector<ChainOutput>& chains, int param) {
  arma::vec out(total_draws(chains));
  arma::uword at = 0;
  for (const auto& c : chains) {
    out.subvec(at, at + c.draws.n_rows - 1) = c.draws.col(param);
    at += c.draws.n_rows;
  }
  return out;
}

double overlap_of(arma::vec a, arma::vec b) {
  return interval_overlap(quantile_type7(a, 0.05), quantile_type7(a, 0.95),
                          quantile_type7(b, 0.05), quantile_type7(b, 0.95));
}

}  // namespace

std::vector<OverlapRow> compare_local_vs_full(
    const std::vector<std::vector<ChainOutput>>& local_fits,
    const std::vector<std::string>& local_site_ids,
    const std::vector<ChainOutput>& full) {
  if (local_fits.size() != local_site_ids.size()) {
    throw DataError("compare_local_vs_full: one site id per local fit required");
  }
  if (full.empty()) throw DataError("compare_local_vs_full: empty joint fit");

  std::vector<ChainOutput> full_rescaled;
  for (const auto& c : full) {
    full_rescaled.push_back(c.meta.rescaled ? c : rescale_posterior(c));
  }
  const ParamLayout& flay = full_rescaled.front().layout;
  const FitMeta& fmeta = full_rescaled.front().meta;

  std::vector<OverlapRow> out;
  for (std::size_t k = 0; k < local_fits.size(); ++k) {
    const std::string& id = local_site_ids[k];
    int i = -1;
    for (std::size_t j = 0; j < fmeta.sites.size(); ++j) {
      if (fmeta.sites[j].id == id) i = static_cast<int>(j);
    }
    if (i < 0) throw DataError("compare_local_vs_full: site " + id + " not in joint fit");
    const std::vector<ChainOutput>& loc = local_fits[k];
    const ParamLayout& llay = loc.front().layout;

    OverlapRow row;
    row.site = id;
    const arma::vec la = merged_column(loc, llay.alpha);
    const arma::vec fa = flay.alpha_tilde >= 0
                             ? merged_column(full_rescaled, flay.alpha_tilde + i)
                             : merged_column(full_rescaled, flay.alpha);
    row.alpha = overlap_of(la, fa);

    auto to_rho = [](arma::vec z) {
      for (auto& v : z) v = std::tanh(0.5 * v);
      return z;
    };
    const arma::vec lr = to_rho(merged_column(loc, llay.z_rho_mean));
    const arma::vec fr = to_rho(flay.z_rho >= 0
                                    ? merged_column(full_rescaled, flay.z_rho + i)
                                    : merged_column(full_rescaled, flay.z_rho_mean));
    row.rho = overlap_of(lr, fr);

    auto to_sd = [](arma::vec z) {
      for (auto& v : z) v = std::exp(0.5 * v);
      return z;
    };
    const arma::vec ls = to_sd(merged_column(loc, llay.z_sig2_mean));
    const arma::vec fs = to_sd(flay.z_sig2 >= 0
                                   ? merged_column(full_rescaled, flay.z_sig2 + i)
                                   : merged_column(full_rescaled, flay.z_sig2_mean));
    row.sigma_eps = overlap_of(ls, fs);
    out.push_back(row);
  }
  return out;
}

}  // namespace daymax
