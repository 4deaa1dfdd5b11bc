// Command-line front end: fit, predict, impute, loocv, diagnose, simulate,
// local-fit and change-summary over CSV station/observation files.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "daymax/commands.hpp"

namespace {

using daymax::RunConfig;

void add_config_flags(CLI::App* cmd, RunConfig& cfg,
                      std::vector<std::string>& config_files,
                      std::vector<std::string>& overrides) {
  cmd->add_option("--config", config_files, "key = value configuration file(s)");
  cmd->add_option("--set", overrides, "inline override, key=value (repeatable)");
  cmd->add_option("--chains", cfg.chains, "number of chains");
  cmd->add_option("--iterations", cfg.iterations, "iterations per chain");
  cmd->add_option("--burn-in", cfg.burn_in, "burn-in iterations");
  cmd->add_option("--thin", cfg.thin, "thinning stride");
  cmd->add_option("--seed", cfg.seed, "base RNG seed");
  cmd->add_option("--variant", cfg.variant, "model variant, e.g. M4 or M2:beta0,sigma");
  cmd->add_option("--day-offset", cfg.day_offset,
                  "calendar offset of day 1 in the annual harmonic");
  cmd->add_option("--phi-mode", cfg.phi_mode, "fixed | grid:<n>");
  cmd->add_option("--phi", cfg.phi_fixed, "fixed decay (0 = 3/max distance)");
  cmd->add_flag("--free-rho-psi{false}", cfg.pin_rho_psi,
                "sample the yearly autoregression instead of pinning it to 0");
  cmd->add_option("--scaling", cfg.scaling, "standardize | center | none");
  cmd->add_option("--days", cfg.days_per_year, "days per year window (<= 153)");
  cmd->add_option("--jobs", cfg.jobs, "worker threads (0 = library default)");
  cmd->add_flag("--drop-incomplete-years", cfg.drop_incomplete_years,
                "drop years with any missing day before fitting");
  cmd->add_flag("--lonlat", cfg.lonlat, "site file holds lon/lat instead of km");
}

// Precedence: defaults < config files < command-line flags < --set.  Config
// files are applied before the real parse (so flags can override them);
// --set entries are applied afterwards.
void preload_config_files(int argc, char** argv, RunConfig& cfg) {
  for (int k = 1; k < argc; ++k) {
    const std::string arg = argv[k];
    if (arg == "--config" && k + 1 < argc) {
      daymax::apply_config_file(cfg, argv[k + 1]);
    } else if (arg.rfind("--config=", 0) == 0) {
      daymax::apply_config_file(cfg, arg.substr(9));
    }
  }
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw daymax::DataError("--set expects key=value, got '" + kv + "'");
    }
    daymax::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical space-time modeling of daily maximum temperatures"};
  app.require_subcommand(1);

  daymax::FitArgs fit;
  std::vector<std::string> fit_cfg_files, fit_sets;
  CLI::App* cfit = app.add_subcommand("fit", "fit the model by MCMC");
  cfit->add_option("--sites", fit.sites_path, "station CSV")->required();
  cfit->add_option("--obs", fit.obs_path, "observation CSV")->required();
  cfit->add_option("--out-prefix", fit.out_prefix, "output prefix")->required();
  add_config_flags(cfit, fit.cfg, fit_cfg_files, fit_sets);

  daymax::PredictArgs pred;
  CLI::App* cpred = app.add_subcommand("predict", "posterior predictive series");
  cpred->add_option("--fit", pred.fit_prefix, "fit output prefix")->required();
  cpred->add_option("--sites", pred.sites_path, "station CSV")->required();
  cpred->add_option("--obs", pred.obs_path, "observation CSV")->required();
  cpred->add_option("--out", pred.out_path, "prediction CSV")->required();
  cpred->add_option("--replicates", pred.replicates_path, "replicates CSV (optional)");
  cpred->add_option("--site-x", pred.x, "target x (km)");
  cpred->add_option("--site-y", pred.y, "target y (km)");
  cpred->add_option("--elev", pred.elev, "target elevation (m)");
  cpred->add_option("--site-id", pred.site_id, "predict at an existing station");
  cpred->add_option("--year", pred.year, "calendar year (default: all)");
  cpred->add_option("--through-day", pred.through_day, "last window day to predict");
  cpred->add_option("--samples", pred.samples, "replicates (0 = all draws)");
  cpred->add_option("--seed", pred.seed, "prediction RNG seed");
  cpred->add_option("--days", pred.days_per_year, "days per year window");
  cpred->add_flag("--lonlat", pred.lonlat, "site file holds lon/lat");
  cpred->add_option("--jobs", pred.jobs, "worker threads");

  daymax::ImputeArgs imp;
  CLI::App* cimp = app.add_subcommand("impute", "fill gaps in an observed series");
  cimp->add_option("--fit", imp.fit_prefix, "fit output prefix")->required();
  cimp->add_option("--sites", imp.sites_path, "station CSV")->required();
  cimp->add_option("--obs", imp.obs_path, "observation CSV")->required();
  cimp->add_option("--site-id", imp.site_id, "station to impute")->required();
  cimp->add_option("--out", imp.out_path, "imputation CSV")->required();
  cimp->add_option("--replicates", imp.replicates_path, "replicates CSV (optional)");
  cimp->add_option("--samples", imp.samples, "replicates (0 = all draws)");
  cimp->add_option("--seed", imp.seed, "prediction RNG seed");
  cimp->add_option("--days", imp.days_per_year, "days per year window");
  cimp->add_flag("--lonlat", imp.lonlat, "site file holds lon/lat");
  cimp->add_option("--jobs", imp.jobs, "worker threads");

  daymax::LoocvArgs loo;
  std::vector<std::string> loo_cfg_files, loo_sets;
  CLI::App* cloo = app.add_subcommand("loocv", "leave-one-site-out model comparison");
  cloo->add_option("--sites", loo.sites_path, "station CSV")->required();
  cloo->add_option("--obs", loo.obs_path, "observation CSV")->required();
  cloo->add_option("--out-prefix", loo.out_prefix, "output prefix")->required();
  cloo->add_option("--variants", loo.variants,
                   "variants to compare (default: the nine-model lattice)");
  cloo->add_option("--samples", loo.samples, "replicates per fold (0 = all draws)");
  add_config_flags(cloo, loo.cfg, loo_cfg_files, loo_sets);

  daymax::DiagnoseArgs diag;
  CLI::App* cdiag = app.add_subcommand("diagnose", "convergence diagnostics");
  cdiag->add_option("--fit", diag.fit_prefix, "fit output prefix")->required();
  cdiag->add_option("--out", diag.out_path, "diagnostics JSON")->required();
  cdiag->add_option("--jobs", diag.jobs, "worker threads");

  daymax::SimulateArgs sim;
  CLI::App* csim = app.add_subcommand("simulate", "forward-simulate a panel");
  csim->add_option("--spec", sim.spec_path, "generator spec JSON")->required();
  csim->add_option("--out-prefix", sim.out_prefix, "output prefix")->required();

  daymax::LocalFitArgs loc;
  std::vector<std::string> loc_cfg_files, loc_sets;
  CLI::App* cloc = app.add_subcommand("local-fit", "independent single-site fit");
  cloc->add_option("--sites", loc.sites_path, "station CSV")->required();
  cloc->add_option("--obs", loc.obs_path, "observation CSV")->required();
  cloc->add_option("--site-id", loc.site_id, "station to fit")->required();
  cloc->add_option("--out", loc.out_path, "posterior summary CSV")->required();
  add_config_flags(cloc, loc.cfg, loc_cfg_files, loc_sets);

  daymax::ChangeSummaryArgs chg;
  CLI::App* cchg = app.add_subcommand("change-summary", "between-window change table");
  cchg->add_option("--sites", chg.sites_path, "station CSV")->required();
  cchg->add_option("--obs", chg.obs_path, "observation CSV")->required();
  cchg->add_option("--out", chg.out_path, "output CSV")->required();
  cchg->add_option("--window1", chg.window1, "first window, YYYY:YYYY")->required();
  cchg->add_option("--window2", chg.window2, "second window, YYYY:YYYY")->required();
  cchg->add_option("--replicates", chg.replicates_path,
                   "predictive replicates CSV; summarizes the posterior change");
  cchg->add_option("--days", chg.days_per_year, "days per year window");
  cchg->add_flag("--lonlat", chg.lonlat, "site file holds lon/lat");

  try {
    preload_config_files(argc, argv, fit.cfg);
    preload_config_files(argc, argv, loo.cfg);
    preload_config_files(argc, argv, loc.cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*cfit) {
      apply_overrides(fit.cfg, fit_sets);
      return daymax::cmd_fit(fit);
    }
    if (*cpred) return daymax::cmd_predict(pred);
    if (*cimp) return daymax::cmd_impute(imp);
    if (*cloo) {
      apply_overrides(loo.cfg, loo_sets);
      return daymax::cmd_loocv(loo);
    }
    if (*cdiag) return daymax::cmd_diagnose(diag);
    if (*csim) return daymax::cmd_simulate(sim);
    if (*cloc) {
      apply_overrides(loc.cfg, loc_sets);
      return daymax::cmd_local_fit(loc);
    }
    if (*cchg) return daymax::cmd_change_summary(chg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
