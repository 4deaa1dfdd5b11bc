// Timing comparison of the serial reference kernels against the OpenMP
// paths: ensemble scoring, composition sampling, and multi-chain fitting.

#include <chrono>
#include <cstdio>

#include "daymax/gibbs.hpp"
#include "daymax/metrics.hpp"
#include "daymax/predictor.hpp"
#include "daymax/synthgen.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

daymax::GeneratorSpec bench_spec() {
  daymax::GeneratorSpec spec;
  for (int i = 0; i < 8; ++i) {
    spec.sites.push_back({"b" + std::to_string(i), 25.0 * (i % 4), 40.0 * (i / 4),
                          400.0 + 120.0 * i});
  }
  spec.T = 12;
  spec.L = 60;
  spec.seed = 7;
  spec.fixed = {22.0, 0.02, 5.0, 1.0, -0.005};
  spec.sig2_lambda = 0.8;
  spec.sig2_eta = 0.05;
  spec.z_rho_mean = 1.2;
  spec.z_sig2_mean = std::log(6.0);
  spec.gp_beta0.sig2 = 1.5;
  spec.gp_alpha.sig2 = 1e-4;
  spec.gp_z_rho.sig2 = 0.05;
  spec.gp_z_sig2.sig2 = 0.05;
  return spec;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif
  const daymax::SimulationResult sim = daymax::simulate_panel(bench_spec());

  daymax::HyperPriors priors;
  daymax::FitOptions opts;
  opts.day_offset = 0;
  daymax::ChainConfig cc;
  cc.iterations = 600;
  cc.burn_in = 300;
  cc.thin = 3;
  cc.seed = 11;

  auto t0 = Clock::now();
  const auto one = daymax::fit_chains(sim.panel, priors, opts, cc, 1);
  const double t_one_chain = seconds_since(t0);

  t0 = Clock::now();
  const auto chains = daymax::fit_chains(sim.panel, priors, opts, cc, 4);
  const double t_four_chains = seconds_since(t0);
  std::printf("fit: 1 chain %.3fs, 4 chains %.3fs (parallel speedup %.2fx ideal 4x)\n",
              t_one_chain, t_four_chains, 4.0 * t_one_chain / t_four_chains);

  daymax::SiteMeta target{"probe", 55.0, 23.0, 700.0};
  daymax::PredictOptions popts;
  popts.B = 400;
  popts.seed = 5;
  popts.parallel = false;
  t0 = Clock::now();
  const auto pred_serial = daymax::predict_panel(chains, target, sim.panel, popts);
  const double t_pred_serial = seconds_since(t0);
  popts.parallel = true;
  t0 = Clock::now();
  const auto pred_par = daymax::predict_panel(chains, target, sim.panel, popts);
  const double t_pred_par = seconds_since(t0);
  const bool same = arma::approx_equal(pred_serial.replicates, pred_par.replicates,
                                       "absdiff", 0.0);
  std::printf("composition: serial %.3fs, parallel %.3fs, bitwise equal: %s\n",
              t_pred_serial, t_pred_par, same ? "yes" : "NO");

  t0 = Clock::now();
  const auto score_serial = daymax::score_site(pred_serial, sim.panel, 0, false);
  const double t_score_serial = seconds_since(t0);
  t0 = Clock::now();
  const auto score_par = daymax::score_site(pred_par, sim.panel, 0, true);
  const double t_score_par = seconds_since(t0);
  std::printf("scoring: serial %.3fs, parallel %.3fs (crps equal: %s)\n", t_score_serial,
              t_score_par, score_serial.crps == score_par.crps ? "yes" : "NO");

  // Sorted-identity CRPS kernel against the literal double sum.
  daymax::Rng rng(99);
  arma::vec reps(2000);
  for (auto& v : reps) v = rng.normal();
  t0 = Clock::now();
  double acc = 0.0;
  for (int k = 0; k < 50; ++k) acc += daymax::crps_cell_reference(reps, 0.3);
  const double t_ref = seconds_since(t0);
  t0 = Clock::now();
  double acc2 = 0.0;
  for (int k = 0; k < 50; ++k) acc2 += daymax::crps_cell(reps, 0.3);
  const double t_fast = seconds_since(t0);
  std::printf("crps kernel (B=2000, 50 cells): reference %.3fs, sorted %.3fs, "
              "max diff %.2e\n",
              t_ref, t_fast, std::abs(acc - acc2) / 50.0);
  return 0;
}
