// End-to-end checks through the installed command-line binary: exit codes,
// the simulate -> fit -> diagnose -> predict pipeline, and usage errors.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#ifndef DAYMAX_CLI
#error "DAYMAX_CLI must point at the command-line binary"
#endif

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(DAYMAX_CLI) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("daymax_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with 2, runtime failures with 1") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("fit") == 2);                      // missing required options
  CHECK(run("--help") == 0);
  TempDir dir;
  CHECK(run("simulate --spec " + dir.file("absent.json") + " --out-prefix " +
            dir.file("x")) == 1);
}

TEST_CASE("simulate, fit, diagnose, loocv pipeline completes at desk scale") {
  TempDir dir;
  {
    std::ofstream out(dir.file("spec.json"));
    out << R"({
      "seed": 7, "years": 5, "days": 20, "day_offset": 0, "first_year": 1970,
      "sites": [
        {"id": "a", "x_km": 0, "y_km": 0, "elev_m": 420},
        {"id": "b", "x_km": 45, "y_km": 12, "elev_m": 880},
        {"id": "c", "x_km": 20, "y_km": 38, "elev_m": 640}
      ],
      "fixed": {"beta0": 23.0, "alpha": 0.02, "beta1": 5.0, "beta2": 1.0,
                "beta3": -0.004},
      "sig2_lambda": 0.4, "sig2_eta": 0.04, "z_rho_mean": 1.1,
      "z_sig2_mean": 1.2,
      "gp_beta0": {"sig2": 0.8}, "gp_alpha": {"sig2": 1e-4},
      "gp_z_rho": {"sig2": 0.03}, "gp_z_sig2": {"sig2": 0.03}
    })";
  }
  REQUIRE(run("simulate --spec " + dir.file("spec.json") + " --out-prefix " +
              dir.file("sim")) == 0);
  REQUIRE(fs::exists(dir.file("sim_obs.csv")));

  const std::string data_flags = " --sites " + dir.file("sim_sites.csv") + " --obs " +
                                 dir.file("sim_obs.csv") + " --days 20";
  REQUIRE(run("fit" + data_flags + " --out-prefix " + dir.file("fit") +
              " --chains 2 --iterations 240 --burn-in 120 --thin 3 --seed 5"
              " --day-offset 0") == 0);
  REQUIRE(run("diagnose --fit " + dir.file("fit") + " --out " + dir.file("diag.json")) ==
          0);
  {
    std::ifstream in(dir.file("diag.json"));
    nlohmann::json j;
    in >> j;
    // An rhat entry for every stored parameter.
    long with_rhat = 0;
    for (const auto& p : j.at("parameters")) {
      if (!p.at("rhat").is_null()) ++with_rhat;
    }
    CHECK(with_rhat == long(j.at("parameters").size()));
  }
  REQUIRE(run("predict --fit " + dir.file("fit") + data_flags + " --out " +
              dir.file("pred.csv") +
              " --site-x 25 --site-y 15 --elev 700 --samples 40") == 0);
  REQUIRE(run("loocv" + data_flags + " --out-prefix " + dir.file("cv") +
              " --variants M0 --chains 1 --iterations 150 --burn-in 50 --thin 2"
              " --seed 3 --day-offset 0") == 0);
  REQUIRE(fs::exists(dir.file("cv_scores.csv")));
  {
    std::ifstream in(dir.file("cv_scores.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "variant,site,rmse,mae,crps,cvg");
  }
  REQUIRE(run("local-fit" + data_flags + " --site-id b --out " + dir.file("local.csv") +
              " --chains 1 --iterations 150 --burn-in 50 --thin 2 --seed 9") == 0);

  SUBCASE("free yearly autoregression and sampled decays reach the artifacts") {
    REQUIRE(run("fit" + data_flags + " --out-prefix " + dir.file("fit3") +
                " --chains 1 --iterations 120 --burn-in 60 --thin 2 --seed 6"
                " --day-offset 0 --free-rho-psi --phi-mode grid:4") == 0);
    std::ifstream in(dir.file("fit3_meta.json"));
    nlohmann::json j;
    in >> j;
    CHECK(j.at("pin_rho_psi_zero") == false);
    CHECK(j.at("phi_mode") == "grid");
    CHECK(j.at("phi_grid").size() == 4);
    std::ifstream draws(dir.file("fit3_draws.csv"));
    std::string text((std::istreambuf_iterator<char>(draws)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find(",rho_psi,") != std::string::npos);
    CHECK(text.find(",phi_beta0,") != std::string::npos);
    REQUIRE(run("diagnose --fit " + dir.file("fit3") + " --out " +
                dir.file("diag3.json")) == 0);
  }

  SUBCASE("identical fit invocations produce identical draws files") {
    REQUIRE(run("fit" + data_flags + " --out-prefix " + dir.file("fit2") +
                " --chains 2 --iterations 240 --burn-in 120 --thin 3 --seed 5"
                " --day-offset 0") == 0);
    std::ifstream a(dir.file("fit_draws.csv"), std::ios::binary);
    std::ifstream b(dir.file("fit2_draws.csv"), std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(a)),
                         std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(b)),
                         std::istreambuf_iterator<char>());
    CHECK(ca == cb);
    CHECK_FALSE(ca.empty());
  }
}
