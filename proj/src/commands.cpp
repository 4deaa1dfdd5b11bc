#include "daymax/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "daymax/local.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace daymax {

namespace {

void set_jobs(int jobs) {
#ifdef _OPENMP
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

PanelDataset load_panel(const std::string& sites_path, const std::string& obs_path,
                        int days_per_year, bool lonlat, bool drop_incomplete) {
  IngestReport rep;
  PanelDataset data = ingest(sites_path, obs_path, days_per_year, lonlat, &rep);
  std::cerr << "ingested " << rep.rows << " rows (" << rep.skipped_out_of_window
            << " outside the May-September window), " << data.I() << " sites, T="
            << data.T << ", L=" << data.L << "\n";
  for (const auto& s : data.sites) {
    const auto it = rep.per_site_observed.find(s.id);
    const long n = it == rep.per_site_observed.end() ? 0 : it->second;
    const double frac = double(n) / (double(data.T) * data.L);
    std::cerr << "  " << s.id << ": " << n << " observed (" << 100.0 * frac << "%)\n";
  }
  if (drop_incomplete) {
    data = data.drop_incomplete_years();
    std::cerr << "kept " << data.T << " complete years\n";
  }
  return data;
}

SiteMeta resolve_target(const PanelDataset& data, const std::string& site_id, double x,
                        double y, double elev) {
  if (!site_id.empty()) return data.sites[data.site_index(site_id)];
  SiteMeta s;
  s.id = "target";
  s.x = x;
  s.y = y;
  s.elev = elev;
  return s;
}

std::pair<int, int> parse_window(const std::string& text, int first_year, int T) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw DataError("window must be <first-year>:<last-year>, got '" + text + "'");
  }
  const int a = static_cast<int>(std::stol(text.substr(0, colon)));
  const int b = static_cast<int>(std::stol(text.substr(colon + 1)));
  const int t0 = a - first_year + 1;
  const int t1 = b - first_year + 1;
  if (t0 < 1 || t1 > T || t0 > t1) {
    throw DataError("window " + text + " outside the observed years");
  }
  return {t0, t1};
}

}  // namespace

int cmd_fit(const FitArgs& args) {
  set_jobs(args.cfg.jobs);
  PanelDataset data = load_panel(args.sites_path, args.obs_path, args.cfg.days_per_year,
                                 args.cfg.lonlat, args.cfg.drop_incomplete_years);
  const FitOptions opts = args.cfg.fit_options();
  const ChainConfig cc = args.cfg.chain_config();
  std::cerr << "fitting variant " << opts.variant.to_string() << ": " << args.cfg.chains
            << " chain(s) x " << cc.iterations << " iterations (burn-in " << cc.burn_in
            << ", thin " << cc.thin << ", seed " << cc.seed << ")\n";
  const std::vector<ChainOutput> chains =
      fit_chains(data, args.cfg.priors, opts, cc, args.cfg.chains);
  save_fit(args.out_prefix, chains, cc, args.cfg.chains);
  write_summary_json(args.out_prefix + "_summary.json", chains);
  double acc_rho = 0.0, acc_sig = 0.0;
  for (const auto& c : chains) {
    acc_rho += c.acceptance.overall_z_rho;
    acc_sig += c.acceptance.overall_z_sig2;
  }
  std::cerr << "post burn-in acceptance: z_rho " << acc_rho / chains.size()
            << ", z_sig2 " << acc_sig / chains.size() << "\n";
  std::cerr << "wrote " << args.out_prefix << "_draws.csv, _meta.json, _summary.json\n";
  return 0;
}

int cmd_predict(const PredictArgs& args) {
  set_jobs(args.jobs);
  const std::vector<ChainOutput> chains = load_fit(args.fit_prefix);
  PanelDataset data =
      ingest(args.sites_path, args.obs_path, args.days_per_year, args.lonlat, nullptr);
  const SiteMeta target = resolve_target(data, args.site_id, args.x, args.y, args.elev);
  const FitMeta& meta = chains.front().meta;

  PredictOptions popts;
  popts.B = args.samples;
  popts.seed = args.seed;
  PredictiveSamples pred;
  if (args.year > 0) {
    const int year_t = args.year - meta.first_year + 1;
    const int through = args.through_day > 0 ? args.through_day : meta.L;
    pred = compose_series(chains, target, year_t, through, data, popts);
  } else {
    pred = predict_panel(chains, target, data, popts);
  }
  write_predictive_csv(args.out_path, pred, meta.first_year);
  if (!args.replicates_path.empty()) {
    write_replicates_csv(args.replicates_path, pred, meta.first_year);
  }
  std::cerr << "predicted " << pred.cells.size() << " cells with " << pred.B()
            << " replicates at (" << target.x << ", " << target.y << ")\n";
  return 0;
}

int cmd_impute(const ImputeArgs& args) {
  set_jobs(args.jobs);
  const std::vector<ChainOutput> chains = load_fit(args.fit_prefix);
  PanelDataset data =
      ingest(args.sites_path, args.obs_path, args.days_per_year, args.lonlat, nullptr);
  const int site = data.site_index(args.site_id);
  PredictOptions popts;
  popts.B = args.samples;
  popts.seed = args.seed;
  const PredictiveSamples pred = impute_missing(chains, data, site, popts);
  write_predictive_csv(args.out_path, pred, data.first_year);
  if (!args.replicates_path.empty()) {
    write_replicates_csv(args.replicates_path, pred, data.first_year);
  }
  std::cerr << "imputed " << pred.cells.size() << " missing cells at " << args.site_id
            << "\n";
  return 0;
}

int cmd_loocv(const LoocvArgs& args) {
  set_jobs(args.cfg.jobs);
  PanelDataset data = load_panel(args.sites_path, args.obs_path, args.cfg.days_per_year,
                                 args.cfg.lonlat, args.cfg.drop_incomplete_years);
  std::vector<ModelVariant> variants;
  if (args.variants.empty()) {
    variants = loocv_default_variants();
  } else {
    for (const auto& v : args.variants) variants.push_back(ModelVariant::parse(v));
  }
  LoocvConfig cfg;
  cfg.chain_cfg = args.cfg.chain_config();
  cfg.n_chains = args.cfg.chains;
  cfg.B = args.samples;
  cfg.base_opts = args.cfg.fit_options();
  const LoocvResult result = run_loocv(data, args.cfg.priors, variants, cfg);
  write_scores_csv(args.out_prefix + "_scores.csv", result);
  write_scores_json(args.out_prefix + "_scores.json", result);
  for (const auto& r : result.mean_rows) {
    std::cerr << r.variant << ": mean rmse " << r.rmse << ", mae " << r.mae << ", crps "
              << r.crps << ", cvg " << r.cvg << (r.failed ? " [failed]" : "") << "\n";
  }
  long failures = 0;
  for (const auto& r : result.rows) failures += r.failed ? 1 : 0;
  if (failures > 0) std::cerr << failures << " fold(s) failed; see the scores JSON\n";
  std::cerr << "wrote " << args.out_prefix << "_scores.csv, _scores.json\n";
  return 0;
}

int cmd_diagnose(const DiagnoseArgs& args) {
  set_jobs(args.jobs);
  const std::vector<ChainOutput> chains = load_fit(args.fit_prefix);
  const DiagnosticsReport report = build_report(chains);
  write_diagnostics_json(args.out_path, report);
  std::cerr << "chains " << report.chains << ", draws/chain " << report.draws_per_chain
            << ", max rhat " << report.max_rhat << ", min ess " << report.min_ess
            << "\n";
  std::cerr << "wrote " << args.out_path << "\n";
  return 0;
}

int cmd_simulate(const SimulateArgs& args) {
  const GeneratorSpec spec = read_generator_spec(args.spec_path);
  const SimulationResult sim = simulate_panel(spec);
  write_sites_csv(args.out_prefix + "_sites.csv", sim.panel.sites);
  write_obs_csv(args.out_prefix + "_obs.csv", sim.panel);
  write_truth_json(args.out_prefix + "_truth.json", sim);
  std::cerr << "simulated " << sim.panel.I() << " sites x " << sim.panel.T << " years x "
            << sim.panel.L << " days (seed " << spec.seed << ")\n";
  std::cerr << "wrote " << args.out_prefix << "_sites.csv, _obs.csv, _truth.json\n";
  return 0;
}

int cmd_local_fit(const LocalFitArgs& args) {
  set_jobs(args.cfg.jobs);
  PanelDataset data = load_panel(args.sites_path, args.obs_path, args.cfg.days_per_year,
                                 args.cfg.lonlat, args.cfg.drop_incomplete_years);
  const int site = data.site_index(args.site_id);
  const std::vector<ChainOutput> chains =
      fit_local(data, site, args.cfg.priors, args.cfg.chain_config(), args.cfg.chains,
                args.cfg.day_offset);
  write_param_summary_csv(args.out_path, chains);
  std::cerr << "local fit for " << args.site_id << " written to " << args.out_path
            << "\n";
  return 0;
}

int cmd_change_summary(const ChangeSummaryArgs& args) {
  PanelDataset data =
      ingest(args.sites_path, args.obs_path, args.days_per_year, args.lonlat, nullptr);
  const auto w1 = parse_window(args.window1, data.first_year, data.T);
  const auto w2 = parse_window(args.window2, data.first_year, data.T);
  std::ofstream out(args.out_path);
  if (!out) throw DataError("cannot write " + args.out_path);
  if (!args.replicates_path.empty()) {
    // Posterior change distribution at a predicted point.
    const PredictiveSamples pred =
        read_replicates_csv(args.replicates_path, data.first_year);
    const ChangeSummary cs = change_summary(pred, w1.first, w1.second, w2.first, w2.second);
    out << "delta_mean,delta_q05,delta_q95,q_sd,prob_positive\n";
    out << format_double(cs.delta_mean) << ','
        << format_double(quantile_type7(cs.delta_draws, 0.05)) << ','
        << format_double(quantile_type7(cs.delta_draws, 0.95)) << ','
        << format_double(cs.q_sd) << ',' << format_double(cs.prob_positive) << '\n';
  } else {
    out << "site,delta_mean,q_sd\n";
    for (int i = 0; i < data.I(); ++i) {
      const ChangeSummary cs =
          change_summary(data, i, w1.first, w1.second, w2.first, w2.second);
      out << data.sites[i].id << ',' << format_double(cs.delta_mean) << ','
          << format_double(cs.q_sd) << '\n';
    }
  }
  std::cerr << "wrote " << args.out_path << "\n";
  return 0;
}

}  // namespace daymax
