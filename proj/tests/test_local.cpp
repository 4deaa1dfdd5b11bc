#include <cmath>
#include <map>

#include "daymax/io.hpp"
#include "daymax/local.hpp"
#include "daymax/predictor.hpp"
#include "daymax/synthgen.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace daymax;

TEST_CASE("interval overlap measure") {
  CHECK(interval_overlap(0.0, 1.0, 0.0, 1.0) == doctest::Approx(1.0));
  CHECK(interval_overlap(0.0, 1.0, 2.0, 3.0) == doctest::Approx(0.0));
  CHECK(interval_overlap(0.0, 2.0, 1.0, 3.0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("the local model is the exact single-site degeneration of the engine") {
  SimulationResult sim = testutil::tiny_panel(3, 5, 12, 47);
  HyperPriors priors;
  ChainConfig cfg;
  cfg.iterations = 120;
  cfg.burn_in = 60;
  cfg.thin = 2;
  cfg.seed = 99;

  const int site = 1;
  const std::vector<ChainOutput> local = fit_local(sim.panel, site, priors, cfg, 1, 0);

  // Same run assembled by hand: single-site panel, all processes off,
  // unscaled covariates, no elevation term.
  PanelDataset one = sim.panel.drop_site(0).drop_site(1);
  REQUIRE(one.I() == 1);
  REQUIRE(one.sites[0].id == sim.panel.sites[site].id);
  const std::vector<ChainOutput> direct =
      fit_chains(one, priors, local_fit_options(0), cfg, 1);

  REQUIRE(local.size() == direct.size());
  CHECK(arma::approx_equal(local[0].draws, direct[0].draws, "absdiff", 0.0));
  CHECK(local[0].layout.names == direct[0].layout.names);
  // No elevation column and no site fields in the local layout.
  CHECK(local[0].layout.beta3 == -1);
  CHECK(local[0].layout.beta0_tilde == -1);
}

TEST_CASE("pure autoregression identifies its coefficient") {
  GeneratorSpec spec;
  spec.sites = {{"one", 0.0, 0.0, 650.0}};
  spec.T = 10;
  spec.L = 153;
  spec.seed = 3;
  spec.day_offset = 0;
  spec.fixed = {21.0, 0.0, 8.0, 1.0, 0.0};
  spec.sig2_lambda = 1e-12;  // years carry no extra signal
  spec.sig2_eta = 1e-12;
  spec.z_rho_mean = 2.0 * std::atanh(0.6);
  spec.z_sig2_mean = std::log(2.0);
  spec.gp_beta0.include = spec.gp_alpha.include = false;
  spec.gp_z_rho.include = spec.gp_z_sig2.include = false;
  const SimulationResult sim = simulate_panel(spec);

  HyperPriors priors;
  ChainConfig cfg;
  cfg.iterations = 1200;
  cfg.burn_in = 600;
  cfg.thin = 3;
  cfg.seed = 21;
  const std::vector<ChainOutput> fit = fit_local(sim.panel, 0, priors, cfg, 1, 0);
  const ChainOutput& c = fit[0];
  arma::vec rho_draws(c.n_draws());
  for (long k = 0; k < c.n_draws(); ++k) {
    rho_draws[k] = std::tanh(0.5 * c.draws(k, c.layout.z_rho_mean));
  }
  CHECK(arma::mean(rho_draws) == doctest::Approx(0.6).epsilon(0.04));

  SUBCASE("identical years push the yearly variance toward the prior floor") {
    arma::vec lam(c.n_draws());
    for (long k = 0; k < c.n_draws(); ++k) lam[k] = c.draws(k, c.layout.sig2_lambda);
    CHECK(arma::mean(lam) < 0.5);  // well below the prior mean of one
  }
}

TEST_CASE("local fits agree with the joint model on synthetic data") {
  GeneratorSpec spec;
  spec.sites = testutil::spread_sites(3);
  spec.T = 8;
  spec.L = 40;
  spec.seed = 71;
  spec.day_offset = 0;
  spec.fixed = {22.0, 0.03, 6.0, 1.0, -0.0035};
  spec.sig2_lambda = 0.5;
  spec.sig2_eta = 0.04;
  spec.z_rho_mean = 1.2;
  spec.z_sig2_mean = std::log(3.0);
  spec.gp_beta0.sig2 = 1.0;
  spec.gp_alpha.sig2 = 4e-4;
  spec.gp_z_rho.sig2 = 0.04;
  spec.gp_z_sig2.sig2 = 0.04;
  const SimulationResult sim = simulate_panel(spec);

  HyperPriors priors;
  ChainConfig cfg;
  cfg.iterations = 700;
  cfg.burn_in = 300;
  cfg.thin = 2;
  cfg.seed = 12;

  FitOptions opts;
  opts.day_offset = 0;
  const std::vector<ChainOutput> full = fit_chains(sim.panel, priors, opts, cfg, 1);

  std::vector<std::vector<ChainOutput>> locals;
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) {
    locals.push_back(fit_local(sim.panel, i, priors, cfg, 1, 0));
    ids.push_back(sim.panel.sites[i].id);
  }
  const std::vector<OverlapRow> rows = compare_local_vs_full(locals, ids, full);
  REQUIRE(rows.size() == 3);
  arma::vec med(3);
  for (int i = 0; i < 3; ++i) {
    CAPTURE(rows[i].site);
    CHECK(rows[i].alpha >= 0.0);
    CHECK(rows[i].rho >= 0.0);
    CHECK(rows[i].sigma_eps >= 0.0);
    med[i] = rows[i].rho;
  }
  // Median agreement across sites for the autocorrelation and scale.
  CHECK(arma::median(med) > 0.5);
  arma::vec med_s(3);
  for (int i = 0; i < 3; ++i) med_s[i] = rows[i].sigma_eps;
  CHECK(arma::median(med_s) > 0.5);

  SUBCASE("identical draw sets overlap fully, disjoint ones not at all") {
    const std::vector<OverlapRow> self = compare_local_vs_full(
        {std::vector<ChainOutput>{locals[0]}}, {ids[0]}, full);
    (void)self;
    CHECK(interval_overlap(1.0, 2.0, 1.0, 2.0) == 1.0);
    CHECK(interval_overlap(1.0, 2.0, 5.0, 6.0) == 0.0);
  }
  SUBCASE("unknown site is rejected") {
    CHECK_THROWS_AS(compare_local_vs_full(locals, {"a", "b", "nope"}, full), DataError);
  }
}

TEST_CASE("single-site recovery covers most generating parameters") {
  GeneratorSpec spec;
  spec.sites = {{"solo", 0.0, 0.0, 520.0}};
  spec.T = 10;
  spec.L = 153;
  spec.seed = 99;
  spec.day_offset = 0;
  spec.fixed = {19.5, 0.05, 7.0, 1.5, 0.0};  // the local model has no elevation term
  spec.sig2_lambda = 0.6;
  spec.sig2_eta = 1e-12;  // the local model has no site-year noise layer
  spec.z_rho_mean = 2.0 * std::atanh(0.55);
  spec.z_sig2_mean = std::log(3.5);
  spec.gp_beta0.include = spec.gp_alpha.include = false;
  spec.gp_z_rho.include = spec.gp_z_sig2.include = false;
  const SimulationResult sim = simulate_panel(spec);

  HyperPriors priors;
  priors.sig2_eta = {2.0, 0.05};
  ChainConfig cfg;
  cfg.iterations = 6000;
  cfg.burn_in = 3000;
  cfg.thin = 6;
  cfg.seed = 31;
  const std::vector<ChainOutput> fit = fit_local(sim.panel, 0, priors, cfg, 2, 0);

  const std::map<std::string, double> truth = {
      {"beta0", 19.5},        {"alpha", 0.05},
      {"beta1", 7.0},         {"beta2", 1.5},
      {"rho_y", 0.55},        {"sigma_eps", std::sqrt(3.5)},
      {"sigma_lambda", std::sqrt(0.6)}};
  int covered = 0, total = 0;
  for (const auto& e : summary_entries(fit)) {
    const auto it = truth.find(e.name);
    if (it == truth.end()) continue;
    ++total;
    const double lo = quantile_type7(e.draws, 0.05);
    const double hi = quantile_type7(e.draws, 0.95);
    CAPTURE(e.name);
    if (lo <= it->second && it->second <= hi) ++covered;
  }
  CHECK(total == 7);
  CHECK(covered >= 6);
}
