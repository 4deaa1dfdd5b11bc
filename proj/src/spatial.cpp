#include "daymax/spatial.hpp"

#include <cmath>

namespace daymax {

arma::mat chol_spd(const arma::mat& A, double* jitter_used) {
  const double mean_diag = arma::mean(A.diag());
  const double ladder[] = {0.0, 1e-10, 1e-8};
  for (double step : ladder) {
    const double jit = step * mean_diag;
    arma::mat L;
    arma::mat M = A;
    if (jit > 0.0) M.diag() += jit;
    if (arma::chol(L, M, "lower")) {
      if (jitter_used) *jitter_used = jit;
      return L;
    }
  }
  throw SingularityError("chol_spd: matrix not positive definite after jitter ladder");
}

double max_pairwise_distance(const std::vector<SiteMeta>& sites) {
  double d_max = 0.0;
  for (std::size_t j = 0; j < sites.size(); ++j) {
    for (std::size_t k = j + 1; k < sites.size(); ++k) {
      d_max = std::max(d_max, site_distance(sites[j], sites[k]));
    }
  }
  return d_max;
}

double default_phi(const std::vector<SiteMeta>& sites) {
  if (sites.size() < 2) throw DataError("default_phi: needs at least two sites");
  const double d_max = max_pairwise_distance(sites);
  if (!(d_max > 0.0)) throw DataError("default_phi: all sites coincide");
  return 3.0 / d_max;
}

CorrelationMatrix exp_correlation(const std::vector<SiteMeta>& sites, double phi) {
  if (!(phi > 0.0)) throw DataError("exp_correlation: phi must be positive");
  if (sites.empty()) throw DataError("exp_correlation: needs at least one site");
  const int n = static_cast<int>(sites.size());
  CorrelationMatrix out;
  out.phi = phi;
  out.R.set_size(n, n);
  out.R.diag().ones();
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const double d = site_distance(sites[j], sites[k]);
      if (d == 0.0) {
        throw SingularityError("exp_correlation: sites '" + sites[j].id + "' and '" +
                               sites[k].id + "' share coordinates");
      }
      out.R(j, k) = out.R(k, j) = std::exp(-phi * d);
    }
  }
  out.chol_lower = chol_spd(out.R, &out.jitter);
  out.log_det = 2.0 * arma::sum(arma::log(out.chol_lower.diag()));
  // R^{-1} = L^{-T} L^{-1}, with jitter folded in when it was needed.
  arma::mat Linv = arma::inv(arma::trimatl(out.chol_lower));
  out.Rinv = Linv.t() * Linv;
  out.sum_Rinv = arma::accu(out.Rinv);
  return out;
}

GaussianMoments krige_conditional(const KrigingSystem& sys) {
  if (sys.sigma.n_rows != sys.sigma.n_cols || sys.sigma.n_rows != sys.mu.n_elem ||
      sys.w.n_elem != sys.mu.n_elem || sys.sigma_i0.n_elem != sys.mu.n_elem) {
    throw DataError("krige_conditional: block dimensions disagree");
  }
  const arma::mat L = chol_spd(sys.sigma);
  const arma::vec a = arma::solve(arma::trimatl(L), sys.sigma_i0);
  const arma::vec b = arma::solve(arma::trimatl(L), sys.w - sys.mu);
  GaussianMoments g;
  g.mean = sys.mu0 + arma::dot(a, b);
  g.var = sys.sigma00 - arma::dot(a, a);
  if (g.var < 0.0) {
    const double tol = 1e-12 * std::max(1.0, std::abs(sys.sigma00));
    if (g.var < -tol) {
      throw NumericError("krige_conditional: negative conditional variance");
    }
    g.var = 0.0;
  }
  return g;
}

double centered_quadform(const arma::vec& x, double m, const CorrelationMatrix& R) {
  const arma::vec d = x - m;
  const arma::vec u = arma::solve(arma::trimatl(R.chol_lower), d);
  return arma::dot(u, u);
}

double mvn_logpdf_centered(const arma::vec& x, double m, double sigma2,
                           const CorrelationMatrix& R) {
  if (!(sigma2 > 0.0)) throw DataError("mvn_logpdf_centered: sigma2 must be positive");
  if (static_cast<int>(x.n_elem) != R.n()) {
    throw DataError("mvn_logpdf_centered: dimension mismatch");
  }
  const double q = centered_quadform(x, m, R);
  const double n = static_cast<double>(x.n_elem);
  return -0.5 * n * std::log(2.0 * M_PI * sigma2) - 0.5 * R.log_det - 0.5 * q / sigma2;
}

}  // namespace daymax
