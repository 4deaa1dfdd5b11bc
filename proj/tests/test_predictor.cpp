#include <cmath>

#include "daymax/predictor.hpp"
#include "daymax/synthgen.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace daymax;

namespace {

// A small real fit shared by the predictor tests.
struct FitFixture {
  SimulationResult sim;
  std::vector<ChainOutput> chains;

  FitFixture() {
    sim = testutil::tiny_panel(4, 5, 10, 101);
    HyperPriors priors;
    FitOptions opts;
    opts.day_offset = 0;
    ChainConfig cfg;
    cfg.iterations = 300;
    cfg.burn_in = 100;
    cfg.thin = 4;
    cfg.seed = 17;
    chains = fit_chains(sim.panel, priors, opts, cfg, 2);
  }
};

// Hand-built single-draw posterior with fully controlled parameter values,
// repeated `copies` times so predictive moments can be estimated.
ChainOutput synthetic_chain(const SimulationResult& sim, const ModelState& st,
                            long copies) {
  FitOptions opts;
  opts.variant = ModelVariant::all();
  opts.day_offset = 0;
  std::vector<std::string> ids;
  for (const auto& s : sim.panel.sites) ids.push_back(s.id);
  ChainOutput chain;
  chain.layout = ParamLayout::create(opts.variant, opts, sim.panel.T, sim.panel.I(), ids);
  chain.meta.sites = sim.panel.sites;
  chain.meta.T = sim.panel.T;
  chain.meta.L = sim.panel.L;
  chain.meta.first_year = sim.panel.first_year;
  chain.meta.variant = opts.variant;
  chain.meta.day_offset = 0;
  chain.meta.scaling_policy = ScalingPolicy::Standardize;
  chain.meta.scaling = build_design(sim.panel, ScalingPolicy::Standardize, 0).scaling;
  chain.meta.phi_mode = PhiMode::Fixed;
  chain.meta.phi_fixed = default_phi(sim.panel.sites);
  arma::rowvec row(chain.layout.size(), arma::fill::zeros);
  const ParamLayout& lay = chain.layout;
  row[lay.beta0] = st.fixed.beta0;
  row[lay.alpha] = st.fixed.alpha;
  row[lay.beta1] = st.fixed.beta1;
  row[lay.beta2] = st.fixed.beta2;
  row[lay.beta3] = st.fixed.beta3;
  row[lay.z_rho_mean] = st.hyper.z_rho_mean;
  row[lay.z_sig2_mean] = st.hyper.z_sig2_mean;
  row[lay.sig2_lambda] = st.hyper.sig2_lambda;
  row[lay.sig2_eta] = st.hyper.sig2_eta;
  row[lay.sig2_beta0] = st.hyper.sig2_beta0;
  row[lay.sig2_alpha] = st.hyper.sig2_alpha;
  row[lay.sig2_z_rho] = st.hyper.sig2_z_rho;
  row[lay.sig2_z_sig2] = st.hyper.sig2_z_sig2;
  for (int i = 0; i < sim.panel.I(); ++i) {
    row[lay.beta0_tilde + i] = st.site.beta0_tilde[i];
    row[lay.alpha_tilde + i] = st.site.alpha_tilde[i];
    row[lay.z_rho + i] = st.site.z_rho[i];
    row[lay.z_sig2 + i] = st.site.z_sig2[i];
  }
  for (int t = 1; t < sim.panel.T; ++t) row[lay.psi + t - 1] = st.temporal.psi[t];
  for (int t = 0; t < sim.panel.T; ++t) {
    for (int i = 0; i < sim.panel.I(); ++i) {
      row[lay.gamma + t * sim.panel.I() + i] = st.temporal.gamma(t, i);
    }
  }
  chain.draws.set_size(copies, lay.size());
  for (long k = 0; k < copies; ++k) chain.draws.row(k) = row;
  chain.iteration_numbers.assign(copies, 1);
  for (long k = 0; k < copies; ++k) chain.iteration_numbers[k] = k + 1;
  chain.acceptance.rate_z_rho.zeros(sim.panel.I());
  chain.acceptance.rate_z_sig2.zeros(sim.panel.I());
  return chain;
}

}  // namespace

TEST_CASE("field kriging") {
  FitFixture fx;
  const std::vector<ChainOutput>& chains = fx.chains;
  PredictOptions opts;
  opts.seed = 3;

  SUBCASE("observed sites reproduce stored values bit for bit") {
    for (int i = 0; i < fx.sim.panel.I(); ++i) {
      const arma::vec b0 =
          krige_field_draw(chains, Field::Beta0, fx.sim.panel.sites[i], opts);
      const arma::vec rho =
          krige_field_draw(chains, Field::ZRho, fx.sim.panel.sites[i], opts);
      long k = 0;
      for (const auto& chain : chains) {
        for (long d = 0; d < chain.n_draws(); ++d, ++k) {
          CHECK(b0[k] == chain.draws(d, chain.layout.beta0_tilde + i));
          CHECK(rho[k] ==
                std::tanh(0.5 * chain.draws(d, chain.layout.z_rho + i)));
        }
      }
    }
  }
  SUBCASE("transform consistency at a new site") {
    SiteMeta s0{"new", 33.0, 21.0, 777.0};
    const arma::vec rho = krige_field_draw(chains, Field::ZRho, s0, opts);
    const arma::vec s2 = krige_field_draw(chains, Field::ZSig2, s0, opts);
    for (double r : rho) {
      CHECK(r > -1.0);
      CHECK(r < 1.0);
    }
    for (double v : s2) CHECK(v > 0.0);
  }
  SUBCASE("huge decay decorrelates the target") {
    FieldKriger kriger(fx.sim.panel.sites, 500.0, 500.0, 50.0);
    const arma::vec w = {1.0, 2.0, 3.0, 4.0};
    const GaussianMoments g = kriger.conditional(w, 1.5, 2.0);
    CHECK(g.mean == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(g.var == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("two-site weights match dense joint conditioning") {
    std::vector<SiteMeta> two = {{"a", 0, 0, 100}, {"b", 60, 0, 200}};
    const double phi = 0.02;
    FieldKriger kriger(two, 20.0, 10.0, phi);
    const double mean = 0.7, sig2 = 1.9;
    const arma::vec w = {1.3, -0.4};
    // Joint covariance over (target, a, b).
    const double d0a = std::hypot(20.0, 10.0), d0b = std::hypot(40.0, 10.0);
    arma::mat S(3, 3, arma::fill::ones);
    S(0, 1) = S(1, 0) = std::exp(-phi * d0a);
    S(0, 2) = S(2, 0) = std::exp(-phi * d0b);
    S(1, 2) = S(2, 1) = std::exp(-phi * 60.0);
    S *= sig2;
    const arma::vec mu = {mean, mean, mean};
    const GaussianMoments want = testutil::conditional_from_joint(mu, S, 0, w);
    const GaussianMoments got = kriger.conditional(w, mean, sig2);
    CHECK(got.mean == doctest::Approx(want.mean).epsilon(1e-10));
    CHECK(got.var == doctest::Approx(want.var).epsilon(1e-10));
  }
  SUBCASE("sampled draws reproduce the conditional moments") {
    std::vector<SiteMeta> two = {{"a", 0, 0, 100}, {"b", 60, 0, 200}};
    ChainOutput chain;
    FitOptions o;
    o.day_offset = 0;
    chain.layout = ParamLayout::create(ModelVariant::all(), o, 1, 2, {"a", "b"});
    chain.meta.sites = two;
    chain.meta.T = 1;
    chain.meta.L = 2;
    chain.meta.variant = ModelVariant::all();
    chain.meta.phi_mode = PhiMode::Fixed;
    chain.meta.phi_fixed = 0.02;
    const long B = 40000;
    chain.draws.zeros(B, chain.layout.size());
    chain.draws.col(chain.layout.beta0).fill(0.7);
    chain.draws.col(chain.layout.sig2_beta0).fill(1.9);
    chain.draws.col(chain.layout.beta0_tilde + 0).fill(1.3);
    chain.draws.col(chain.layout.beta0_tilde + 1).fill(-0.4);
    chain.iteration_numbers.assign(B, 1);
    std::vector<ChainOutput> one = {chain};
    PredictOptions po;
    po.seed = 9;
    const arma::vec draws = krige_field_draw(one, Field::Beta0, {"p", 20, 10, 0}, po);
    FieldKriger kriger(two, 20.0, 10.0, 0.02);
    const GaussianMoments want = kriger.conditional({1.3, -0.4}, 0.7, 1.9);
    CHECK(arma::mean(draws) ==
          doctest::Approx(want.mean).epsilon(0.05 / std::sqrt(double(B)) * 50));
    CHECK(arma::var(draws) == doctest::Approx(want.var).epsilon(0.05));
  }
}

TEST_CASE("ordinary kriging day-1 seed") {
  SimulationResult sim = testutil::tiny_panel(3, 2, 4, 7);

  SUBCASE("observed site interpolates exactly") {
    for (int i = 0; i < 3; ++i) {
      const double got =
          seed_day1(sim.panel, 1, sim.panel.sites[i].x, sim.panel.sites[i].y);
      CHECK(got == doctest::Approx(sim.panel.value(0, 0, i)).epsilon(1e-8));
    }
  }
  SUBCASE("constant field returns the constant") {
    PanelDataset d = sim.panel;
    for (int i = 0; i < 3; ++i) d.values[d.idx(0, 0, i)] = 21.5;
    CHECK(seed_day1(d, 1, 999.0, -50.0) == doctest::Approx(21.5));
  }
  SUBCASE("weights solve the constrained system") {
    // Independent check: assemble the ordinary-kriging equations here and
    // verify the returned estimate equals weights'values.
    const PanelDataset& d = sim.panel;
    arma::vec v(3);
    for (int i = 0; i < 3; ++i) v[i] = d.value(0, 0, i);
    const double x0 = 40.0, y0 = 25.0;
    const double sill = arma::dot(v - arma::mean(v), v - arma::mean(v)) / 3.0;
    const double phi = 3.0 / max_pairwise_distance(d.sites);
    arma::mat A(4, 4, arma::fill::zeros);
    arma::vec rhs(4);
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        A(j, k) = sill * std::exp(-phi * site_distance(d.sites[j], d.sites[k]));
      }
      A(j, 3) = A(3, j) = 1.0;
      rhs[j] = sill * std::exp(-phi * std::hypot(d.sites[j].x - x0, d.sites[j].y - y0));
    }
    rhs[3] = 1.0;
    const arma::vec sol = arma::solve(A, rhs);
    CHECK(std::abs(arma::accu(sol.head(3)) - 1.0) < 1e-10);  // unbiasedness
    CHECK(seed_day1(d, 1, x0, y0) ==
          doctest::Approx(arma::dot(sol.head(3), v)).epsilon(1e-10));
  }
  SUBCASE("missing day-1 values are excluded; empty year errors") {
    PanelDataset d = sim.panel;
    d.miss[d.idx(1, 0, 0)] = 1;
    d.miss[d.idx(1, 0, 1)] = 1;
    CHECK(seed_day1(d, 2, 10.0, 10.0) == doctest::Approx(d.value(1, 0, 2)));
    d.miss[d.idx(1, 0, 2)] = 1;
    CHECK_THROWS_AS(seed_day1(d, 2, 10.0, 10.0), DataError);
  }
}

TEST_CASE("composition sampling") {
  SimulationResult sim = testutil::tiny_panel(4, 5, 10, 11);

  SUBCASE("noise-free limit is the deterministic recursion of the means") {
    ModelState st = sim.truth;
    st.hyper.sig2_eta = 1e-30;
    st.site.z_sig2.fill(-70.0);
    st.hyper.z_sig2_mean = -70.0;
    const ChainOutput chain = synthetic_chain(sim, st, 3);
    std::vector<ChainOutput> chains = {chain};
    const SiteMeta& s0 = sim.panel.sites[1];  // coincident: exact fields
    PredictOptions opts;
    opts.seed = 2;
    const PredictiveSamples pred = compose_series(chains, s0, 2, 10, sim.panel, opts);
    REQUIRE(pred.B() == 3);
    // Deterministic oracle recursion.  Composition draws gamma from its
    // prior level, which collapses to the prior mean in this limit.
    const Design design = design_from_meta(chain.meta);
    const int t = 1, i = 1;
    const double gamma = st.site.beta0_tilde[i] +
                         st.site.alpha_tilde[i] * design.tc[t] + st.temporal.psi[t];
    const double rho = st.site.rho(i);
    double prev = sim.panel.value(t, 0, i);  // interpolated day-1 seed
    for (int l = 1; l < 10; ++l) {
      const double mu = seasonal_mean(design, st.fixed, l, design.ec[i]) + gamma;
      const double mu_prev =
          seasonal_mean(design, st.fixed, l - 1, design.ec[i]) + gamma;
      prev = mu + rho * (prev - mu_prev);
      CHECK(pred.replicates(0, l) == doctest::Approx(prev).epsilon(1e-6));
    }
  }
  SUBCASE("one-step-ahead mean matches the closed form") {
    ModelState st = sim.truth;
    const long B = 4000;
    const ChainOutput chain = synthetic_chain(sim, st, B);
    std::vector<ChainOutput> chains = {chain};
    const SiteMeta& s0 = sim.panel.sites[2];
    PredictOptions opts;
    opts.seed = 5;
    const PredictiveSamples pred = compose_series(chains, s0, 1, 2, sim.panel, opts);
    const Design design = design_from_meta(chain.meta);
    const int i = 2;
    const double gamma_mean = st.site.beta0_tilde[i] +
                              st.site.alpha_tilde[i] * design.tc[0] +
                              st.temporal.psi[0];
    const double rho = st.site.rho(i);
    const double seed_val = sim.panel.value(0, 0, i);
    const double mu1 = seasonal_mean(design, st.fixed, 1, design.ec[i]);
    const double mu0 = seasonal_mean(design, st.fixed, 0, design.ec[i]);
    // E[Y_2] = mu_2 + (1-rho) E[gamma] + rho (seed - mu_1)
    const double want = mu1 + (1.0 - rho) * gamma_mean + rho * (seed_val - mu0);
    const arma::vec y2 = pred.replicates.col(1);
    const double se = arma::stddev(y2) / std::sqrt(double(B));
    CHECK(std::abs(arma::mean(y2) - want) < 4.0 * se);
  }
  SUBCASE("interval width grows with distance from the stations") {
    ModelState st = sim.truth;
    const ChainOutput chain = synthetic_chain(sim, st, 3000);
    std::vector<ChainOutput> chains = {chain};
    PredictOptions opts;
    opts.seed = 4;
    // Probes marching away from the network along +x.  Widths saturate once
    // the correlation dies out, so allow Monte Carlo slack on the plateau.
    double base_x = 0.0, base_y = 0.0;
    for (const auto& s : sim.panel.sites) {
      base_x = std::max(base_x, s.x);
      base_y += s.y / sim.panel.I();
    }
    double last_width = -1.0;
    for (double step : {10.0, 60.0, 150.0, 400.0}) {
      SiteMeta probe{"p", base_x + step, base_y, 600.0};
      const PredictiveSamples pred =
          compose_series(chains, probe, 3, 10, sim.panel, opts);
      const double width = arma::mean(pred.cell_upper().tail(9) -
                                      pred.cell_lower().tail(9));
      CHECK(width >= last_width * (1.0 - 0.03));
      last_width = width;
    }
    // And the kriging variance itself is strictly monotone.
    double last_var = -1.0;
    for (double step : {10.0, 60.0, 150.0, 400.0}) {
      FieldKriger kriger(sim.panel.sites, base_x + step, base_y,
                         chain.meta.phi_fixed);
      const GaussianMoments g =
          kriger.conditional(st.site.beta0_tilde, st.fixed.beta0, 1.7);
      CHECK(g.var > last_var);
      last_var = g.var;
    }
  }
  SUBCASE("replicate matrix is deterministic in the seed") {
    FitFixture fx;
    PredictOptions opts;
    opts.seed = 21;
    const SiteMeta s0{"q", 51.0, 17.0, 800.0};
    const PredictiveSamples a = predict_panel(fx.chains, s0, fx.sim.panel, opts);
    const PredictiveSamples b = predict_panel(fx.chains, s0, fx.sim.panel, opts);
    CHECK(arma::approx_equal(a.replicates, b.replicates, "absdiff", 0.0));
  }
}

TEST_CASE("imputation of missing stretches") {
  SimulationResult sim = testutil::tiny_panel(4, 3, 12, 13);

  SUBCASE("no missing cells yields an empty result") {
    ModelState st = sim.truth;
    const ChainOutput chain = synthetic_chain(sim, st, 2);
    const PredictiveSamples pred =
        impute_missing({chain}, sim.panel, 0, PredictOptions{});
    CHECK(pred.cells.empty());
  }
  SUBCASE("single missing cell follows the one-step conditional") {
    ModelState st = sim.truth;
    const long B = 6000;
    const ChainOutput chain = synthetic_chain(sim, st, B);
    PanelDataset gappy = sim.panel;
    const int t = 1, l = 5, i = 2;
    gappy.miss[gappy.idx(t, l, i)] = 1;
    PredictOptions opts;
    opts.seed = 8;
    const PredictiveSamples pred = impute_missing({chain}, gappy, i, opts);
    REQUIRE(pred.cells.size() == 1);
    CHECK(pred.cells[0].t == t);
    CHECK(pred.cells[0].l == l);
    const Design design = design_from_meta(chain.meta);
    const double gamma = st.temporal.gamma(t, i);  // stored site: exact gamma
    const double rho = st.site.rho(i);
    const double mu = seasonal_mean(design, st.fixed, l, design.ec[i]) + gamma;
    const double mu_prev = seasonal_mean(design, st.fixed, l - 1, design.ec[i]) + gamma;
    const double want_mean = mu + rho * (sim.panel.value(t, l - 1, i) - mu_prev);
    const double want_var = st.site.sig2(i);
    const arma::vec reps = pred.replicates.col(0);
    CHECK(arma::mean(reps) ==
          doctest::Approx(want_mean).epsilon(4.0 * std::sqrt(want_var / B)));
    CHECK(arma::var(reps) == doctest::Approx(want_var).epsilon(0.1));
  }
  SUBCASE("a fully missing year is composed from a kriged day-1 seed") {
    ModelState st = sim.truth;
    const ChainOutput chain = synthetic_chain(sim, st, 50);
    PanelDataset gappy = sim.panel;
    for (int l = 0; l < 12; ++l) gappy.miss[gappy.idx(2, l, 1)] = 1;
    PredictOptions opts;
    opts.seed = 14;
    const PredictiveSamples pred = impute_missing({chain}, gappy, 1, opts);
    CHECK(pred.cells.size() == 12);
    // Day-1 cell equals the deterministic kriged seed in every replicate.
    const double seed_val = seed_day1(gappy, 3, gappy.sites[1].x, gappy.sites[1].y);
    for (long b = 0; b < pred.B(); ++b) {
      CHECK(pred.replicates(b, 0) == doctest::Approx(seed_val));
    }
  }
  SUBCASE("shape mismatch against the fitted panel is rejected") {
    ModelState st = sim.truth;
    const ChainOutput chain = synthetic_chain(sim, st, 2);
    PanelDataset other = sim.panel.drop_incomplete_years();
    other.T -= 1;
    other.values.resize(std::size_t(other.T) * other.L * other.I());
    other.miss.resize(other.values.size());
    CHECK_THROWS_AS(impute_missing({chain}, other, 0, PredictOptions{}), DataError);
  }
}

TEST_CASE("imputation intervals are calibrated on masked synthetic data") {
  // Mask scattered stretches at one station of a complete panel, fit on the
  // remaining stations, impute, and check 90% interval coverage of the
  // held-back truth.
  GeneratorSpec spec;
  spec.sites = testutil::spread_sites(6, 90.0);
  spec.T = 8;
  spec.L = 30;
  spec.seed = 2025;
  spec.day_offset = 0;
  spec.fixed = {21.0, 0.02, 6.0, 1.0, -0.003};
  spec.sig2_lambda = 0.5;
  spec.sig2_eta = 0.05;
  spec.z_rho_mean = 1.2;
  spec.z_sig2_mean = std::log(4.0);
  spec.gp_beta0.sig2 = 1.0;
  spec.gp_alpha.sig2 = 1e-4;
  spec.gp_z_rho.sig2 = 0.03;
  spec.gp_z_sig2.sig2 = 0.03;
  const SimulationResult sim = simulate_panel(spec);

  const int target = 2;
  PanelDataset masked = sim.panel;
  long n_masked = 0;
  for (int t = 0; t < spec.T; ++t) {
    // A mid-season stretch each year plus the odd isolated day.
    for (int l = 9 + (t % 3); l < 16 + (t % 3); ++l) {
      masked.miss[masked.idx(t, l, target)] = 1;
      ++n_masked;
    }
    masked.miss[masked.idx(t, 24, target)] = 1;
    ++n_masked;
  }

  // Fit without the masked station; the imputation conditions on its
  // observed segments only.
  const PanelDataset train = masked.drop_site(target);
  HyperPriors priors;
  FitOptions opts;
  opts.day_offset = 0;
  ChainConfig cfg;
  cfg.iterations = 1500;
  cfg.burn_in = 700;
  cfg.thin = 4;
  cfg.seed = 77;
  const std::vector<ChainOutput> chains = fit_chains(train, priors, opts, cfg, 2);

  PredictOptions popts;
  popts.B = 200;
  popts.seed = 8;
  const PredictiveSamples pred = impute_missing(chains, masked, target, popts);
  REQUIRE(long(pred.cells.size()) == n_masked);
  const arma::vec lo = pred.cell_lower(), hi = pred.cell_upper();
  long inside = 0;
  for (std::size_t c = 0; c < pred.cells.size(); ++c) {
    const double y = sim.panel.value(pred.cells[c].t, pred.cells[c].l, target);
    inside += (lo[c] <= y && y <= hi[c]) ? 1 : 0;
  }
  const double cvg = double(inside) / double(pred.cells.size());
  CHECK(cvg > 0.78);
  CHECK(cvg <= 1.0);
}
