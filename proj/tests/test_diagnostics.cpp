#include <cmath>

#include "daymax/diagnostics.hpp"
#include "daymax/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace daymax;

TEST_CASE("rhat hand cases and sentinels") {
  SUBCASE("two identical short chains") {
    const arma::vec c = {1.0, 2.0, 3.0};
    CHECK(rhat({c, c}) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  }
  SUBCASE("constant chains at different levels diverge") {
    const arma::vec a(10, arma::fill::value(1.0));
    const arma::vec b(10, arma::fill::value(2.0));
    CHECK(std::isinf(rhat({a, b})));
    CHECK(rhat({a, a}) == 1.0);
  }
  SUBCASE("iid chains sit near one") {
    Rng rng(3);
    std::vector<arma::vec> chains;
    for (int m = 0; m < 4; ++m) {
      arma::vec c(10000);
      for (auto& v : c) v = rng.normal();
      chains.push_back(c);
    }
    const double r = rhat(chains);
    CHECK(r > 0.99);
    CHECK(r < 1.05);
  }
  SUBCASE("affine invariance") {
    Rng rng(5);
    std::vector<arma::vec> chains, shifted;
    for (int m = 0; m < 3; ++m) {
      arma::vec c(500);
      for (auto& v : c) v = rng.normal();
      chains.push_back(c);
      shifted.push_back(3.0 * c + 11.0);
    }
    CHECK(rhat(chains) == doctest::Approx(rhat(shifted)).epsilon(1e-12));
    CHECK(ess(chains) == doctest::Approx(ess(shifted)).epsilon(1e-10));
  }
  SUBCASE("contract errors") {
    const arma::vec c = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(rhat({c}), DataError);
    CHECK_THROWS_AS(rhat({arma::vec{1.0}, arma::vec{1.0}}), DataError);
    CHECK_THROWS_AS(rhat({c, arma::vec{1.0, 2.0}}), DataError);
  }
}

TEST_CASE("effective sample size calibration") {
  SUBCASE("iid draws recover the nominal count") {
    Rng rng(7);
    arma::vec c(1000);
    for (auto& v : c) v = rng.normal();
    const double e = ess({c});
    CHECK(e > 800.0);
    CHECK(e < 1200.0);
  }
  SUBCASE("ten iid chains behave like their pooled size") {
    Rng rng(11);
    std::vector<arma::vec> chains;
    for (int m = 0; m < 10; ++m) {
      arma::vec c(100);
      for (auto& v : c) v = rng.normal();
      chains.push_back(c);
    }
    const double e = ess(chains);
    CHECK(e > 800.0);
    CHECK(e < 1050.0 * 1.05);
  }
  SUBCASE("AR(1) with lag-one correlation 0.5 has a third of the draws") {
    Rng rng(13);
    const double rho = 0.5;
    std::vector<arma::vec> chains;
    const int M = 4, n = 20000;
    for (int m = 0; m < M; ++m) {
      arma::vec c(n);
      double x = 0.0;
      for (int k = 0; k < n; ++k) {
        x = rho * x + std::sqrt(1 - rho * rho) * rng.normal();
        c[k] = x;
      }
      chains.push_back(c);
    }
    const double e = ess(chains);
    const double want = double(M) * n / 3.0;
    CHECK(e > want * 0.75);
    CHECK(e < want * 1.25);
  }
  SUBCASE("constant chain degenerates to one") {
    const arma::vec c(50, arma::fill::value(4.2));
    CHECK(ess({c}) == 1.0);
  }
  SUBCASE("never exceeds the draw count by more than the tolerance") {
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
      arma::vec c(400);
      // Antithetic pattern: negative lag-1 correlation pushes ESS above N.
      double x = 0.0;
      for (int k = 0; k < 400; ++k) {
        x = -0.6 * x + rng.normal();
        c[k] = x;
      }
      CHECK(ess({c}) <= 400.0 * 1.05);
    }
  }
}

TEST_CASE("thinning protocol") {
  auto fabricate = [](long n_draws) {
    ChainOutput c;
    FitOptions opts;
    c.layout = ParamLayout::create(ModelVariant::none(), opts, 1, 1, {"a"});
    c.draws.zeros(n_draws, c.layout.size());
    for (long k = 0; k < n_draws; ++k) c.draws(k, 0) = k;
    c.iteration_numbers.assign(n_draws, 0);
    return c;
  };

  SUBCASE("the reporting protocol: 100k draws to 1000 and 100 per chain") {
    const std::vector<ChainOutput> chains = {fabricate(100000)};
    const ThinnedViews v = thin_protocol(chains, ThinTargets{});
    CHECK(v.rhat_stride == 100);
    CHECK(v.inference_stride == 1000);
    CHECK(v.rhat_indices.size() == 1000);
    CHECK(v.inference_indices.size() == 100);
    // Exhaustive index oracle.
    for (std::size_t k = 0; k < v.rhat_indices.size(); ++k) {
      CHECK(v.rhat_indices[k] == k * 100);
    }
  }
  SUBCASE("target equal to available uses stride one") {
    const std::vector<ChainOutput> chains = {fabricate(64)};
    ThinTargets t;
    t.rhat_per_chain = 64;
    t.inference_per_chain = 8;
    const ThinnedViews v = thin_protocol(chains, t);
    CHECK(v.rhat_stride == 1);
    CHECK(v.inference_stride == 8);
  }
  SUBCASE("insufficient draws name the required minimum") {
    const std::vector<ChainOutput> chains = {fabricate(50)};
    ThinTargets t;
    t.rhat_per_chain = 100;
    try {
      thin_protocol(chains, t);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("100") != std::string::npos);
    }
  }
}

TEST_CASE("report assembly over a real fit") {
  SimulationResult sim = testutil::tiny_panel(3, 4, 8, 23);
  HyperPriors priors;
  FitOptions opts;
  opts.day_offset = 0;
  ChainConfig cfg;
  cfg.iterations = 220;
  cfg.burn_in = 100;
  cfg.thin = 3;
  cfg.seed = 77;
  const std::vector<ChainOutput> chains = fit_chains(sim.panel, priors, opts, cfg, 2);
  const DiagnosticsReport rep = build_report(chains);
  CHECK(rep.chains == 2);
  CHECK(rep.draws_per_chain == 40);
  CHECK(rep.params.size() == std::size_t(chains[0].layout.size()));
  bool found_beta1 = false;
  for (const auto& p : rep.params) {
    CHECK(p.ess >= 1.0);
    if (p.name == "beta1") found_beta1 = true;
  }
  CHECK(found_beta1);
  CHECK(rep.acceptance.rate_z_rho.n_elem == 3);
}

TEST_CASE("equilibrium covariance closed form") {
  // Hand evaluation of the three components.
  const double got = equilibrium_covariance(2.0, 0.01, 0.5, 0.02, 1.5, 0.6, 50.0,
                                            3.0, 5.0, 2);
  const double want = 2.0 * std::exp(-0.5) + 15.0 * 0.5 * std::exp(-1.0) +
                      1.5 / (1.0 - 0.36) * 0.36;
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  // Pinned yearly autoregression: the psi term only survives at lag zero.
  CHECK(equilibrium_covariance(0.0, 1.0, 0.0, 1.0, 2.0, 0.0, 10.0, 1.0, 1.0, 0) ==
        doctest::Approx(2.0));
  CHECK(equilibrium_covariance(0.0, 1.0, 0.0, 1.0, 2.0, 0.0, 10.0, 1.0, 1.0, 1) ==
        doctest::Approx(0.0));
  CHECK_THROWS_AS(equilibrium_covariance(1, 1, 1, 1, 1, 1.0, 1, 1, 1, 0), NumericError);
}
