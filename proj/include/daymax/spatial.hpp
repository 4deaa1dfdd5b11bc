#pragma once

#include <armadillo>
#include <span>
#include <vector>

#include "daymax/types.hpp"

namespace daymax {

// Exponential correlation matrix R(phi) with cached Cholesky factor,
// log-determinant and precision entries (the r_jk of the full conditionals).
struct CorrelationMatrix {
  double phi = 0.0;
  double jitter = 0.0;  // diagonal jitter applied before factorization
  arma::mat R;
  arma::mat chol_lower;
  arma::mat Rinv;
  double log_det = 0.0;
  double sum_Rinv = 0.0;  // 1' R^{-1} 1

  int n() const { return static_cast<int>(R.n_rows); }
};

/// exp(-phi * ||s_j - s_k||) over a site set; throws SingularityError naming
/// the pair when two sites share coordinates.
CorrelationMatrix exp_correlation(const std::vector<SiteMeta>& sites, double phi);

/// Decay rule 3 / d_max over the pairwise site distances.
double default_phi(const std::vector<SiteMeta>& sites);

double max_pairwise_distance(const std::vector<SiteMeta>& sites);

// Joint-Gaussian blocks for conditioning a process at one new point on the
// values at observed points.
struct KrigingSystem {
  double mu0 = 0.0;
  arma::vec mu;
  double sigma00 = 0.0;
  arma::vec sigma_i0;
  arma::mat sigma;
  arma::vec w;  // observed values
};

struct GaussianMoments {
  double mean = 0.0;
  double var = 0.0;
};

/// Exact Gaussian conditional mean/variance of the new point given w.
GaussianMoments krige_conditional(const KrigingSystem& sys);

/// log N(x | m 1, sigma2 R) using the cached factorization of R.
double mvn_logpdf_centered(const arma::vec& x, double m, double sigma2,
                           const CorrelationMatrix& R);

/// (x - m 1)' R^{-1} (x - m 1).
double centered_quadform(const arma::vec& x, double m, const CorrelationMatrix& R);

/// SPD Cholesky with jitter ladder {0, 1e-10, 1e-8} x mean diagonal;
/// returns the lower factor and records the jitter used.
arma::mat chol_spd(const arma::mat& A, double* jitter_used = nullptr);

}  // namespace daymax
