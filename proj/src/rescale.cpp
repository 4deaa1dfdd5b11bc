#include <cmath>

#include "daymax/gibbs.hpp"

namespace daymax {

ChainOutput rescale_posterior(const ChainOutput& chain) {
  if (chain.meta.rescaled) {
    throw DataError("rescale_posterior: draws are already in original units");
  }
  ChainOutput out = chain;
  out.meta.rescaled = true;
  const ParamLayout& lay = chain.layout;
  const CovariateScaling& sc = chain.meta.scaling;
  const int I = lay.I, T = lay.T;

  for (arma::uword r = 0; r < out.draws.n_rows; ++r) {
    arma::rowvec row = out.draws.row(r);
    const double alpha = row[lay.alpha] / sc.t_scale;
    const double beta1 = row[lay.beta1] / sc.sin_scale;
    const double beta2 = row[lay.beta2] / sc.cos_scale;
    const double beta3 = lay.beta3 >= 0 ? row[lay.beta3] / sc.elev_scale : 0.0;
    const double shift = beta1 * sc.sin_center + beta2 * sc.cos_center +
                         beta3 * sc.elev_center;
    row[lay.alpha] = alpha;
    row[lay.beta1] = beta1;
    row[lay.beta2] = beta2;
    if (lay.beta3 >= 0) row[lay.beta3] = beta3;
    row[lay.beta0] = row[lay.beta0] - alpha * sc.t_center - shift;
    if (lay.sig2_alpha >= 0) {
      row[lay.sig2_alpha] = row[lay.sig2_alpha] / (sc.t_scale * sc.t_scale);
    }
    for (int i = 0; i < I; ++i) {
      const double a_i =
          lay.alpha_tilde >= 0 ? row[lay.alpha_tilde + i] / sc.t_scale : alpha;
      if (lay.alpha_tilde >= 0) row[lay.alpha_tilde + i] = a_i;
      if (lay.beta0_tilde >= 0) {
        row[lay.beta0_tilde + i] = row[lay.beta0_tilde + i] - a_i * sc.t_center - shift;
      }
    }
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < I; ++i) row[lay.gamma + t * I + i] -= shift;
    }
    out.draws.row(r) = row;
  }
  return out;
}

}  // namespace daymax
