#include "daymax/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace daymax {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(context + ": bad number '" + s + "'");
  }
}

long parse_long(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(context + ": bad integer '" + s + "'");
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

constexpr int kWindowMonths[5] = {5, 6, 7, 8, 9};
constexpr int kWindowMonthDays[5] = {31, 30, 31, 31, 30};
constexpr int kWindowMonthOffset[5] = {0, 31, 61, 92, 123};

}  // namespace

int month_day_to_window_day(int month, int day) {
  for (int m = 0; m < 5; ++m) {
    if (kWindowMonths[m] == month) {
      if (day < 1 || day > kWindowMonthDays[m]) return -1;
      return kWindowMonthOffset[m] + day;
    }
  }
  return -1;
}

void window_day_to_month_day(int l, int* month, int* day) {
  if (l < 1 || l > 153) throw DataError("window day outside 1..153");
  for (int m = 4; m >= 0; --m) {
    if (l > kWindowMonthOffset[m]) {
      *month = kWindowMonths[m];
      *day = l - kWindowMonthOffset[m];
      return;
    }
  }
}

std::vector<SiteMeta> read_sites_csv(const std::string& path, bool lonlat) {
  std::ifstream in = open_in(path);
  std::string line;
  std::vector<SiteMeta> sites;
  long line_no = 0;
  bool header = true;
  std::vector<double> lon, lat;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (header) {
      header = false;
      if (f.size() == 4 && (f[0] == "id")) continue;  // header row
    }
    if (f.size() != 4) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 4 columns");
    }
    SiteMeta s;
    s.id = f[0];
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (lonlat) {
      lon.push_back(parse_double(f[1], ctx));
      lat.push_back(parse_double(f[2], ctx));
    } else {
      s.x = parse_double(f[1], ctx);
      s.y = parse_double(f[2], ctx);
    }
    s.elev = parse_double(f[3], ctx);
    sites.push_back(s);
  }
  if (lonlat && !sites.empty()) {
    // Equirectangular projection about the centroid; km units.
    const double deg = M_PI / 180.0, R = 6371.0;
    double lon0 = 0.0, lat0 = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      lon0 += lon[i];
      lat0 += lat[i];
    }
    lon0 /= sites.size();
    lat0 /= sites.size();
    for (std::size_t i = 0; i < sites.size(); ++i) {
      sites[i].x = R * std::cos(lat0 * deg) * (lon[i] - lon0) * deg;
      sites[i].y = R * (lat[i] - lat0) * deg;
    }
  }
  return sites;
}

void write_sites_csv(const std::string& path, const std::vector<SiteMeta>& sites) {
  std::ofstream out = open_out(path);
  out << "id,x_km,y_km,elev_m\n";
  for (const auto& s : sites) {
    out << s.id << ',' << format_double(s.x) << ',' << format_double(s.y) << ','
        << format_double(s.elev) << '\n';
  }
}

PanelDataset ingest(const std::string& sites_path, const std::string& obs_path,
                    int days_per_year, bool lonlat, IngestReport* report) {
  if (days_per_year < 1 || days_per_year > 153) {
    throw DataError("ingest: days_per_year must be in 1..153");
  }
  PanelDataset data;
  data.sites = read_sites_csv(sites_path, lonlat);
  data.L = days_per_year;

  struct Row {
    int site = 0, year = 0, l = 0;
    double value = 0.0;
    long line = 0;
  };
  std::vector<Row> rows;
  IngestReport rep;

  std::ifstream in = open_in(obs_path);
  std::string line;
  long line_no = 0;
  bool maybe_header = true;
  int year_min = 0, year_max = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (maybe_header) {
      maybe_header = false;
      if (f.size() == 3 && f[0] == "site_id") continue;
    }
    const std::string ctx = obs_path + ":" + std::to_string(line_no);
    if (f.size() != 3) throw DataError(ctx + ": expected site_id,date,tmax_c");
    Row r;
    r.line = line_no;
    r.site = -1;
    for (int i = 0; i < data.I(); ++i) {
      if (data.sites[i].id == f[0]) r.site = i;
    }
    if (r.site < 0) throw DataError(ctx + ": unknown site_id '" + f[0] + "'");
    const std::string& d = f[1];
    if (d.size() != 10 || d[4] != '-' || d[7] != '-') {
      throw DataError(ctx + ": bad ISO date '" + d + "'");
    }
    r.year = static_cast<int>(parse_long(d.substr(0, 4), ctx));
    const int month = static_cast<int>(parse_long(d.substr(5, 2), ctx));
    const int day = static_cast<int>(parse_long(d.substr(8, 2), ctx));
    r.l = month_day_to_window_day(month, day);
    r.value = parse_double(f[2], ctx);
    ++rep.rows;
    if (r.l < 0 || r.l > days_per_year) {
      ++rep.skipped_out_of_window;
      continue;
    }
    year_min = rows.empty() ? r.year : std::min(year_min, r.year);
    year_max = rows.empty() ? r.year : std::max(year_max, r.year);
    rows.push_back(r);
  }
  if (rows.empty()) throw DataError("ingest: no in-window observations in " + obs_path);

  data.first_year = year_min;
  data.T = year_max - year_min + 1;
  data.values.assign(static_cast<std::size_t>(data.T) * data.L * data.I(), 0.0);
  data.miss.assign(data.values.size(), 1);
  for (const auto& r : rows) {
    const std::size_t k = data.idx(r.year - year_min, r.l - 1, r.site);
    if (!data.miss[k]) {
      throw DataError(obs_path + ":" + std::to_string(r.line) + ": duplicate cell for " +
                      data.sites[r.site].id);
    }
    data.values[k] = r.value;
    data.miss[k] = 0;
    ++rep.per_site_observed[data.sites[r.site].id];
  }
  data.validate();
  if (report) *report = rep;
  return data;
}

void write_obs_csv(const std::string& path, const PanelDataset& data) {
  std::ofstream out = open_out(path);
  out << "site_id,date,tmax_c\n";
  char date[16];
  for (int t = 0; t < data.T; ++t) {
    for (int l = 0; l < data.L; ++l) {
      int month = 0, day = 0;
      window_day_to_month_day(l + 1, &month, &day);
      for (int i = 0; i < data.I(); ++i) {
        if (data.missing(t, l, i)) continue;
        std::snprintf(date, sizeof(date), "%04d-%02d-%02d", data.first_year + t, month,
                      day);
        out << data.sites[i].id << ',' << date << ','
            << format_double(data.value(t, l, i)) << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------
// fit artifacts
// ---------------------------------------------------------------------------

void write_draws_csv(const std::string& path, const std::vector<ChainOutput>& chains) {
  std::ofstream out = open_out(path);
  out << "chain,iter,param,value\n";
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const ChainOutput& ch = chains[c];
    for (long d = 0; d < ch.n_draws(); ++d) {
      const long iter = ch.iteration_numbers[d];
      for (int p = 0; p < ch.layout.size(); ++p) {
        out << c << ',' << iter << ',' << ch.layout.names[p] << ','
            << format_double(ch.draws(d, p)) << '\n';
      }
    }
  }
}

std::vector<ChainOutput> read_draws_csv(const std::string& path, const FitMeta& meta,
                                        const FitOptions& opts) {
  std::vector<std::string> ids;
  for (const auto& s : meta.sites) ids.push_back(s.id);
  const ParamLayout lay =
      ParamLayout::create(meta.variant, opts, meta.T, static_cast<int>(ids.size()), ids);

  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);  // header
  struct Cell {
    long chain, iter;
    int param;
    double value;
  };
  std::vector<Cell> cells;
  long line_no = 1;
  long max_chain = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (f.size() != 4) throw DataError(ctx + ": expected chain,iter,param,value");
    Cell cell;
    cell.chain = parse_long(f[0], ctx);
    cell.iter = parse_long(f[1], ctx);
    cell.param = lay.find(f[2]);
    if (cell.param < 0) throw DataError(ctx + ": unknown parameter '" + f[2] + "'");
    cell.value = parse_double(f[3], ctx);
    max_chain = std::max(max_chain, cell.chain);
    cells.push_back(cell);
  }
  if (cells.empty()) throw DataError("read_draws_csv: no rows in " + path);

  std::vector<ChainOutput> chains(max_chain + 1);
  std::vector<std::set<long>> iter_sets(max_chain + 1);
  for (const auto& cell : cells) iter_sets[cell.chain].insert(cell.iter);
  for (long c = 0; c <= max_chain; ++c) {
    ChainOutput& ch = chains[c];
    ch.layout = lay;
    ch.meta = meta;
    ch.iteration_numbers.assign(iter_sets[c].begin(), iter_sets[c].end());
    ch.draws.set_size(ch.iteration_numbers.size(), lay.size());
    ch.draws.fill(arma::datum::nan);
  }
  for (const auto& cell : cells) {
    ChainOutput& ch = chains[cell.chain];
    const auto it = std::lower_bound(ch.iteration_numbers.begin(),
                                     ch.iteration_numbers.end(), cell.iter);
    const long row = it - ch.iteration_numbers.begin();
    ch.draws(row, cell.param) = cell.value;
  }
  for (auto& ch : chains) {
    if (ch.draws.has_nan()) {
      throw DataError("read_draws_csv: incomplete draw rows in " + path);
    }
  }
  return chains;
}

namespace {

std::string scaling_policy_name(ScalingPolicy p) {
  switch (p) {
    case ScalingPolicy::Standardize: return "standardize";
    case ScalingPolicy::CenterOnly: return "center";
    case ScalingPolicy::None: return "none";
  }
  return "standardize";
}

ScalingPolicy scaling_policy_from(const std::string& s) {
  if (s == "standardize") return ScalingPolicy::Standardize;
  if (s == "center") return ScalingPolicy::CenterOnly;
  if (s == "none") return ScalingPolicy::None;
  throw DataError("unknown scaling policy '" + s + "'");
}

ordered_json acceptance_json(const AcceptanceReport& a) {
  ordered_json j;
  j["overall_z_rho"] = a.overall_z_rho;
  j["overall_z_sig2"] = a.overall_z_sig2;
  j["rate_z_rho"] = std::vector<double>(a.rate_z_rho.begin(), a.rate_z_rho.end());
  j["rate_z_sig2"] = std::vector<double>(a.rate_z_sig2.begin(), a.rate_z_sig2.end());
  j["counted_iterations"] = a.counted_iterations;
  return j;
}

AcceptanceReport acceptance_from_json(const ordered_json& j) {
  AcceptanceReport a;
  a.overall_z_rho = j.at("overall_z_rho").get<double>();
  a.overall_z_sig2 = j.at("overall_z_sig2").get<double>();
  const auto r1 = j.at("rate_z_rho").get<std::vector<double>>();
  const auto r2 = j.at("rate_z_sig2").get<std::vector<double>>();
  a.rate_z_rho = arma::vec(r1);
  a.rate_z_sig2 = arma::vec(r2);
  a.counted_iterations = j.at("counted_iterations").get<long>();
  return a;
}

}  // namespace

void write_meta_json(const std::string& path, const std::vector<ChainOutput>& chains,
                     const ChainConfig& cfg, int n_chains) {
  if (chains.empty()) throw DataError("write_meta_json: no chains");
  const FitMeta& m = chains.front().meta;
  ordered_json j;
  j["format"] = "daymax-fit/1";
  j["variant"] = m.variant.to_string();
  j["pin_rho_psi_zero"] = m.pin_rho_psi_zero;
  j["include_elevation"] = m.include_elevation;
  j["scaling_policy"] = scaling_policy_name(m.scaling_policy);
  j["day_offset"] = m.day_offset;
  j["phi_mode"] = m.phi_mode == PhiMode::Grid ? "grid" : "fixed";
  j["phi_fixed"] = m.phi_fixed;
  j["phi_grid"] = m.phi_grid;
  j["T"] = m.T;
  j["L"] = m.L;
  j["first_year"] = m.first_year;
  j["rescaled"] = m.rescaled;
  ordered_json sites = ordered_json::array();
  for (const auto& s : m.sites) {
    sites.push_back({{"id", s.id}, {"x_km", s.x}, {"y_km", s.y}, {"elev_m", s.elev}});
  }
  j["sites"] = sites;
  j["scaling"] = {{"t_center", m.scaling.t_center},     {"t_scale", m.scaling.t_scale},
                  {"sin_center", m.scaling.sin_center}, {"sin_scale", m.scaling.sin_scale},
                  {"cos_center", m.scaling.cos_center}, {"cos_scale", m.scaling.cos_scale},
                  {"elev_center", m.scaling.elev_center},
                  {"elev_scale", m.scaling.elev_scale}};
  j["chains"] = n_chains;
  j["iterations"] = cfg.iterations;
  j["burn_in"] = cfg.burn_in;
  j["thin"] = cfg.thin;
  j["seed"] = cfg.seed;
  ordered_json acc = ordered_json::array();
  for (const auto& c : chains) acc.push_back(acceptance_json(c.acceptance));
  j["acceptance"] = acc;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

std::pair<FitMeta, FitOptions> read_meta_json(const std::string& path, ChainConfig* cfg,
                                              int* n_chains) {
  std::ifstream in = open_in(path);
  ordered_json j;
  in >> j;
  FitMeta m;
  m.variant = ModelVariant::parse(j.at("variant").get<std::string>());
  m.pin_rho_psi_zero = j.at("pin_rho_psi_zero").get<bool>();
  m.include_elevation = j.at("include_elevation").get<bool>();
  m.scaling_policy = scaling_policy_from(j.at("scaling_policy").get<std::string>());
  m.day_offset = j.at("day_offset").get<int>();
  m.phi_mode = j.at("phi_mode").get<std::string>() == "grid" ? PhiMode::Grid
                                                             : PhiMode::Fixed;
  m.phi_fixed = j.at("phi_fixed").get<double>();
  m.phi_grid = j.at("phi_grid").get<std::vector<double>>();
  m.T = j.at("T").get<int>();
  m.L = j.at("L").get<int>();
  m.first_year = j.at("first_year").get<int>();
  m.rescaled = j.at("rescaled").get<bool>();
  for (const auto& s : j.at("sites")) {
    SiteMeta site;
    site.id = s.at("id").get<std::string>();
    site.x = s.at("x_km").get<double>();
    site.y = s.at("y_km").get<double>();
    site.elev = s.at("elev_m").get<double>();
    m.sites.push_back(site);
  }
  const auto& sc = j.at("scaling");
  m.scaling.t_center = sc.at("t_center").get<double>();
  m.scaling.t_scale = sc.at("t_scale").get<double>();
  m.scaling.sin_center = sc.at("sin_center").get<double>();
  m.scaling.sin_scale = sc.at("sin_scale").get<double>();
  m.scaling.cos_center = sc.at("cos_center").get<double>();
  m.scaling.cos_scale = sc.at("cos_scale").get<double>();
  m.scaling.elev_center = sc.at("elev_center").get<double>();
  m.scaling.elev_scale = sc.at("elev_scale").get<double>();

  FitOptions opts;
  opts.variant = m.variant;
  opts.pin_rho_psi_zero = m.pin_rho_psi_zero;
  opts.include_elevation = m.include_elevation;
  opts.scaling = m.scaling_policy;
  opts.day_offset = m.day_offset;
  opts.phi_mode = m.phi_mode;
  opts.phi_fixed = m.phi_fixed;

  if (cfg) {
    cfg->iterations = j.at("iterations").get<long>();
    cfg->burn_in = j.at("burn_in").get<long>();
    cfg->thin = j.at("thin").get<long>();
    cfg->seed = j.at("seed").get<std::uint64_t>();
  }
  if (n_chains) *n_chains = j.at("chains").get<int>();
  return {m, opts};
}

void save_fit(const std::string& prefix, const std::vector<ChainOutput>& chains,
              const ChainConfig& cfg, int n_chains) {
  write_draws_csv(prefix + "_draws.csv", chains);
  write_meta_json(prefix + "_meta.json", chains, cfg, n_chains);
}

std::vector<ChainOutput> load_fit(const std::string& prefix) {
  ChainConfig cfg;
  int n_chains = 0;
  const auto [meta, opts] = read_meta_json(prefix + "_meta.json", &cfg, &n_chains);
  std::vector<ChainOutput> chains = read_draws_csv(prefix + "_draws.csv", meta, opts);

  std::ifstream in = open_in(prefix + "_meta.json");
  ordered_json j;
  in >> j;
  const auto& acc = j.at("acceptance");
  for (std::size_t c = 0; c < chains.size() && c < acc.size(); ++c) {
    chains[c].acceptance = acceptance_from_json(acc[c]);
    chains[c].iterations = cfg.iterations;
    chains[c].burn_in = cfg.burn_in;
    chains[c].thin = cfg.thin;
    chains[c].seed = cfg.seed ^ static_cast<std::uint64_t>(c);
  }
  return chains;
}

// ---------------------------------------------------------------------------
// summaries
// ---------------------------------------------------------------------------

namespace {

arma::vec merged(const std::vector<ChainOutput>& chains, int param) {
  arma::vec out;
  for (const auto& c : chains) {
    out = arma::join_cols(out, arma::vec(c.draws.col(param)));
  }
  return out;
}

}  // namespace

std::vector<SummaryEntry> summary_entries(const std::vector<ChainOutput>& raw) {
  std::vector<ChainOutput> chains;
  for (const auto& c : raw) chains.push_back(c.meta.rescaled ? c : rescale_posterior(c));
  const ParamLayout& lay = chains.front().layout;
  const FitMeta& meta = chains.front().meta;
  std::vector<SummaryEntry> out;
  auto push = [&](const std::string& name, arma::vec v) { out.push_back({name, v}); };
  auto tf = [&](int param, auto f) {
    arma::vec v = merged(chains, param);
    for (auto& x : v) x = f(x);
    return v;
  };
  auto ident = [](double x) { return x; };
  push("beta0", tf(lay.beta0, ident));
  push("alpha", tf(lay.alpha, ident));
  push("beta1", tf(lay.beta1, ident));
  push("beta2", tf(lay.beta2, ident));
  if (lay.beta3 >= 0) push("beta3", tf(lay.beta3, ident));
  push("rho_y", tf(lay.z_rho_mean, [](double z) { return std::tanh(0.5 * z); }));
  push("sigma_eps", tf(lay.z_sig2_mean, [](double z) { return std::exp(0.5 * z); }));
  push("sigma_eta", tf(lay.sig2_eta, [](double v) { return std::sqrt(v); }));
  push("sigma_lambda", tf(lay.sig2_lambda, [](double v) { return std::sqrt(v); }));
  if (lay.sig2_beta0 >= 0) {
    push("sigma_beta0", tf(lay.sig2_beta0, [](double v) { return std::sqrt(v); }));
  }
  if (lay.sig2_alpha >= 0) {
    push("sigma_alpha", tf(lay.sig2_alpha, [](double v) { return std::sqrt(v); }));
  }
  if (lay.sig2_z_rho >= 0) {
    push("sigma_z_rho", tf(lay.sig2_z_rho, [](double v) { return std::sqrt(v); }));
  }
  if (lay.sig2_z_sig2 >= 0) {
    push("sigma_z_sig2", tf(lay.sig2_z_sig2, [](double v) { return std::sqrt(v); }));
  }
  if (lay.rho_psi >= 0) push("rho_psi", tf(lay.rho_psi, ident));
  if (lay.phi_beta0 >= 0) push("phi_beta0", tf(lay.phi_beta0, ident));
  if (lay.phi_alpha >= 0) push("phi_alpha", tf(lay.phi_alpha, ident));
  if (lay.phi_z_rho >= 0) push("phi_z_rho", tf(lay.phi_z_rho, ident));
  if (lay.phi_z_sig2 >= 0) push("phi_z_sig2", tf(lay.phi_z_sig2, ident));
  for (int i = 0; i < lay.I; ++i) {
    const std::string id = meta.sites[i].id;
    if (lay.beta0_tilde >= 0) {
      push("beta0_tilde[" + id + "]", tf(lay.beta0_tilde + i, ident));
    }
    if (lay.alpha_tilde >= 0) {
      push("alpha_tilde[" + id + "]", tf(lay.alpha_tilde + i, ident));
    }
    if (lay.z_rho >= 0) {
      push("rho_y[" + id + "]",
           tf(lay.z_rho + i, [](double z) { return std::tanh(0.5 * z); }));
    }
    if (lay.z_sig2 >= 0) {
      push("sigma_eps[" + id + "]",
           tf(lay.z_sig2 + i, [](double z) { return std::exp(0.5 * z); }));
    }
  }
  if (lay.psi >= 0) {
    for (int t = 1; t < lay.T; ++t) {
      push("psi[" + std::to_string(t + 1) + "]", tf(lay.psi + t - 1, ident));
    }
  }
  return out;
}

void write_summary_json(const std::string& path, const std::vector<ChainOutput>& chains) {
  const auto entries = summary_entries(chains);
  ordered_json j;
  j["format"] = "daymax-summary/1";
  j["interval"] = 0.90;
  ordered_json params = ordered_json::array();
  for (const auto& e : entries) {
    params.push_back({{"name", e.name},
                      {"mean", arma::mean(e.draws)},
                      {"q05", quantile_type7(e.draws, 0.05)},
                      {"q95", quantile_type7(e.draws, 0.95)}});
  }
  j["parameters"] = params;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_param_summary_csv(const std::string& path,
                             const std::vector<ChainOutput>& chains) {
  const auto entries = summary_entries(chains);
  std::ofstream out = open_out(path);
  out << "param,mean,q05,q95\n";
  for (const auto& e : entries) {
    out << e.name << ',' << format_double(arma::mean(e.draws)) << ','
        << format_double(quantile_type7(e.draws, 0.05)) << ','
        << format_double(quantile_type7(e.draws, 0.95)) << '\n';
  }
}

void write_diagnostics_json(const std::string& path, const DiagnosticsReport& report) {
  ordered_json j;
  j["format"] = "daymax-diagnostics/1";
  j["chains"] = report.chains;
  j["draws_per_chain"] = report.draws_per_chain;
  j["thin"] = report.thin;
  j["max_rhat"] = report.max_rhat;
  j["min_ess"] = report.min_ess;
  ordered_json params = ordered_json::array();
  for (const auto& p : report.params) {
    ordered_json e;
    e["name"] = p.name;
    if (std::isfinite(p.rhat)) {
      e["rhat"] = p.rhat;
    } else {
      e["rhat"] = nullptr;
    }
    e["ess"] = p.ess;
    e["mean"] = p.mean;
    params.push_back(e);
  }
  j["parameters"] = params;
  j["acceptance"] = acceptance_json(report.acceptance);
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_predictive_csv(const std::string& path, const PredictiveSamples& pred,
                          int first_year) {
  std::ofstream out = open_out(path);
  out << "year,day,mean,q05,q95\n";
  const arma::vec mean = pred.cell_mean();
  const arma::vec lo = pred.cell_lower();
  const arma::vec hi = pred.cell_upper();
  for (std::size_t c = 0; c < pred.cells.size(); ++c) {
    out << first_year + pred.cells[c].t << ',' << pred.cells[c].l + 1 << ','
        << format_double(mean[c]) << ',' << format_double(lo[c]) << ','
        << format_double(hi[c]) << '\n';
  }
}

void write_replicates_csv(const std::string& path, const PredictiveSamples& pred,
                          int first_year) {
  std::ofstream out = open_out(path);
  out << "year,day,rep,value\n";
  for (std::size_t c = 0; c < pred.cells.size(); ++c) {
    for (long b = 0; b < pred.B(); ++b) {
      out << first_year + pred.cells[c].t << ',' << pred.cells[c].l + 1 << ',' << b << ','
          << format_double(pred.replicates(b, c)) << '\n';
    }
  }
}

PredictiveSamples read_replicates_csv(const std::string& path, int first_year) {
  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);  // header
  struct Rec {
    int t, l;
    long rep;
    double value;
  };
  std::vector<Rec> recs;
  long line_no = 1;
  long max_rep = -1;
  int max_t = -1, max_l = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (f.size() != 4) throw DataError(ctx + ": expected year,day,rep,value");
    Rec r;
    r.t = static_cast<int>(parse_long(f[0], ctx)) - first_year;
    r.l = static_cast<int>(parse_long(f[1], ctx)) - 1;
    r.rep = parse_long(f[2], ctx);
    r.value = parse_double(f[3], ctx);
    if (r.t < 0 || r.l < 0) throw DataError(ctx + ": cell before the first year/day");
    max_rep = std::max(max_rep, r.rep);
    max_t = std::max(max_t, r.t);
    max_l = std::max(max_l, r.l);
    recs.push_back(r);
  }
  if (recs.empty()) throw DataError("read_replicates_csv: no rows in " + path);
  PredictiveSamples pred;
  pred.T = max_t + 1;
  pred.L = max_l + 1;
  std::map<std::pair<int, int>, std::size_t> cell_of;
  for (const auto& r : recs) {
    const auto key = std::make_pair(r.t, r.l);
    if (!cell_of.count(key)) {
      cell_of[key] = pred.cells.size();
      pred.cells.push_back({r.t, r.l});
    }
  }
  pred.replicates.set_size(max_rep + 1, pred.cells.size());
  pred.replicates.fill(arma::datum::nan);
  for (const auto& r : recs) {
    pred.replicates(r.rep, cell_of.at({r.t, r.l})) = r.value;
  }
  if (pred.replicates.has_nan()) {
    throw DataError("read_replicates_csv: ragged replicate set in " + path);
  }
  return pred;
}

void write_scores_csv(const std::string& path, const LoocvResult& result) {
  std::ofstream out = open_out(path);
  out << "variant,site,rmse,mae,crps,cvg\n";
  auto write_row = [&](const LoocvRow& r) {
    out << r.variant << ',' << r.site << ',';
    if (r.failed) {
      out << "NA,NA,NA,NA\n";
    } else {
      out << format_double(r.rmse) << ',' << format_double(r.mae) << ','
          << format_double(r.crps) << ',' << format_double(r.cvg) << '\n';
    }
  };
  for (const auto& r : result.rows) write_row(r);
  for (const auto& r : result.mean_rows) write_row(r);
}

void write_scores_json(const std::string& path, const LoocvResult& result) {
  ordered_json j;
  j["format"] = "daymax-loocv/1";
  ordered_json means = ordered_json::array();
  for (const auto& r : result.mean_rows) {
    means.push_back({{"variant", r.variant},
                     {"rmse", r.rmse},
                     {"mae", r.mae},
                     {"crps", r.crps},
                     {"cvg", r.cvg},
                     {"failed", r.failed}});
  }
  j["variant_means"] = means;
  ordered_json rows = ordered_json::array();
  for (const auto& r : result.rows) {
    ordered_json e;
    e["variant"] = r.variant;
    e["site"] = r.site;
    e["failed"] = r.failed;
    if (r.failed) {
      e["error"] = r.error;
    } else {
      e["rmse"] = r.rmse;
      e["mae"] = r.mae;
      e["crps"] = r.crps;
      e["cvg"] = r.cvg;
    }
    rows.push_back(e);
  }
  j["sites"] = rows;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// run configuration
// ---------------------------------------------------------------------------

FitOptions RunConfig::fit_options() const {
  FitOptions opts;
  opts.variant = ModelVariant::parse(variant);
  opts.pin_rho_psi_zero = pin_rho_psi;
  opts.include_elevation = include_elevation;
  opts.scaling = scaling_policy_from(scaling);
  opts.day_offset = day_offset;
  opts.phi_fixed = phi_fixed;
  if (phi_mode == "fixed") {
    opts.phi_mode = PhiMode::Fixed;
  } else if (phi_mode.rfind("grid", 0) == 0) {
    opts.phi_mode = PhiMode::Grid;
    const auto colon = phi_mode.find(':');
    if (colon != std::string::npos) {
      opts.phi_grid_n =
          static_cast<int>(parse_long(phi_mode.substr(colon + 1), "phi_mode"));
    }
  } else {
    throw DataError("phi_mode must be 'fixed' or 'grid:<n>'");
  }
  return opts;
}

ChainConfig RunConfig::chain_config() const {
  if (burn_in > iterations) throw DataError("config: burn_in exceeds iterations");
  if (thin < 1) throw DataError("config: thin must be >= 1");
  if (chains < 1) throw DataError("config: chains must be >= 1");
  ChainConfig cfg;
  cfg.iterations = iterations;
  cfg.burn_in = burn_in;
  cfg.thin = thin;
  cfg.seed = seed;
  return cfg;
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto as_bool = [&](const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw DataError("config: bad boolean '" + v + "' for " + key);
  };
  if (key == "chains") {
    cfg.chains = static_cast<int>(parse_long(value, key));
  } else if (key == "iterations") {
    cfg.iterations = parse_long(value, key);
  } else if (key == "burn_in") {
    cfg.burn_in = parse_long(value, key);
  } else if (key == "thin") {
    cfg.thin = parse_long(value, key);
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_long(value, key));
  } else if (key == "variant") {
    cfg.variant = value;
  } else if (key == "day_offset") {
    cfg.day_offset = static_cast<int>(parse_long(value, key));
  } else if (key == "phi_mode") {
    cfg.phi_mode = value;
  } else if (key == "phi_fixed") {
    cfg.phi_fixed = parse_double(value, key);
  } else if (key == "pin_rho_psi") {
    cfg.pin_rho_psi = as_bool(value);
  } else if (key == "include_elevation") {
    cfg.include_elevation = as_bool(value);
  } else if (key == "scaling") {
    cfg.scaling = value;
  } else if (key == "days_per_year") {
    cfg.days_per_year = static_cast<int>(parse_long(value, key));
  } else if (key == "jobs") {
    cfg.jobs = static_cast<int>(parse_long(value, key));
  } else if (key == "drop_incomplete_years") {
    cfg.drop_incomplete_years = as_bool(value);
  } else if (key == "lonlat") {
    cfg.lonlat = as_bool(value);
  } else if (key.rfind("prior.", 0) == 0) {
    const std::string rest = key.substr(6);
    const auto dot = rest.find('.');
    if (dot == std::string::npos) throw DataError("config: bad prior key " + key);
    const std::string param = rest.substr(0, dot);
    const std::string field = rest.substr(dot + 1);
    auto gauss = [&](GaussianPrior& g) {
      if (field == "mean") {
        g.mean = parse_double(value, key);
      } else if (field == "sd") {
        g.sd = parse_double(value, key);
      } else {
        throw DataError("config: bad prior field " + key);
      }
    };
    auto ig = [&](InvGammaPrior& p) {
      if (field == "a") {
        p.a = parse_double(value, key);
      } else if (field == "b") {
        p.b = parse_double(value, key);
      } else {
        throw DataError("config: bad prior field " + key);
      }
    };
    HyperPriors& pr = cfg.priors;
    if (param == "beta0") {
      gauss(pr.beta0);
    } else if (param == "alpha") {
      gauss(pr.alpha);
    } else if (param == "beta1") {
      gauss(pr.beta1);
    } else if (param == "beta2") {
      gauss(pr.beta2);
    } else if (param == "beta3") {
      gauss(pr.beta3);
    } else if (param == "z_rho_mean") {
      gauss(pr.z_rho_mean);
    } else if (param == "z_sig2_mean") {
      gauss(pr.z_sig2_mean);
    } else if (param == "sig2_lambda") {
      ig(pr.sig2_lambda);
    } else if (param == "sig2_eta") {
      ig(pr.sig2_eta);
    } else if (param == "sig2_beta0") {
      ig(pr.sig2_beta0);
    } else if (param == "sig2_alpha") {
      ig(pr.sig2_alpha);
    } else if (param == "sig2_z_rho") {
      ig(pr.sig2_z_rho);
    } else if (param == "sig2_z_sig2") {
      ig(pr.sig2_z_sig2);
    } else if (param == "rho_psi") {
      if (field == "lower") {
        pr.rho_psi_lower = parse_double(value, key);
      } else if (field == "upper") {
        pr.rho_psi_upper = parse_double(value, key);
      } else {
        throw DataError("config: bad prior field " + key);
      }
    } else if (param == "phi_grid" && field == "values") {
      pr.phi_grid.clear();
      std::stringstream ss(value);
      std::string tok;
      while (std::getline(ss, tok, ';')) {
        pr.phi_grid.push_back(parse_double(tok, key));
      }
    } else {
      throw DataError("config: unknown prior parameter " + key);
    }
  } else {
    throw DataError("config: unknown key '" + key + "'");
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    auto ltrim = line.find_first_not_of(" \t");
    if (ltrim == std::string::npos) continue;
    auto rtrim = line.find_last_not_of(" \t\r");
    line = line.substr(ltrim, rtrim - ltrim + 1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    apply_config_entry(cfg, trim(key), trim(value));
  }
}

// ---------------------------------------------------------------------------
// simulation specs
// ---------------------------------------------------------------------------

GeneratorSpec read_generator_spec(const std::string& path) {
  std::ifstream in = open_in(path);
  ordered_json j;
  in >> j;
  GeneratorSpec spec;
  spec.T = j.value("years", spec.T);
  spec.L = j.value("days", spec.L);
  spec.day_offset = j.value("day_offset", spec.day_offset);
  spec.first_year = j.value("first_year", spec.first_year);
  spec.centered_covariates = j.value("centered_covariates", spec.centered_covariates);
  spec.seed = j.value("seed", spec.seed);
  for (const auto& s : j.at("sites")) {
    SiteMeta site;
    site.id = s.at("id").get<std::string>();
    site.x = s.at("x_km").get<double>();
    site.y = s.at("y_km").get<double>();
    site.elev = s.at("elev_m").get<double>();
    spec.sites.push_back(site);
  }
  if (j.contains("fixed")) {
    const auto& f = j.at("fixed");
    spec.fixed.beta0 = f.value("beta0", 0.0);
    spec.fixed.alpha = f.value("alpha", 0.0);
    spec.fixed.beta1 = f.value("beta1", 0.0);
    spec.fixed.beta2 = f.value("beta2", 0.0);
    spec.fixed.beta3 = f.value("beta3", 0.0);
  }
  spec.rho_psi = j.value("rho_psi", spec.rho_psi);
  spec.sig2_lambda = j.value("sig2_lambda", spec.sig2_lambda);
  spec.sig2_eta = j.value("sig2_eta", spec.sig2_eta);
  spec.z_rho_mean = j.value("z_rho_mean", spec.z_rho_mean);
  spec.z_sig2_mean = j.value("z_sig2_mean", spec.z_sig2_mean);
  auto field = [&](const char* name, GpFieldSpec& f) {
    if (!j.contains(name)) return;
    const auto& g = j.at(name);
    f.include = g.value("include", true);
    f.sig2 = g.value("sig2", f.sig2);
    f.phi = g.value("phi", f.phi);
    if (g.contains("values")) f.values = g.at("values").get<std::vector<double>>();
  };
  field("gp_beta0", spec.gp_beta0);
  field("gp_alpha", spec.gp_alpha);
  field("gp_z_rho", spec.gp_z_rho);
  field("gp_z_sig2", spec.gp_z_sig2);
  return spec;
}

void write_truth_json(const std::string& path, const SimulationResult& sim) {
  ordered_json j;
  j["format"] = "daymax-truth/1";
  const ModelState& s = sim.truth;
  j["fixed"] = {{"beta0", s.fixed.beta0}, {"alpha", s.fixed.alpha},
                {"beta1", s.fixed.beta1}, {"beta2", s.fixed.beta2},
                {"beta3", s.fixed.beta3}};
  j["rho_psi"] = s.hyper.rho_psi;
  j["sig2_lambda"] = s.hyper.sig2_lambda;
  j["sig2_eta"] = s.hyper.sig2_eta;
  j["z_rho_mean"] = s.hyper.z_rho_mean;
  j["z_sig2_mean"] = s.hyper.z_sig2_mean;
  j["beta0_tilde"] = std::vector<double>(s.site.beta0_tilde.begin(),
                                         s.site.beta0_tilde.end());
  j["alpha_tilde"] = std::vector<double>(s.site.alpha_tilde.begin(),
                                         s.site.alpha_tilde.end());
  j["z_rho"] = std::vector<double>(s.site.z_rho.begin(), s.site.z_rho.end());
  j["z_sig2"] = std::vector<double>(s.site.z_sig2.begin(), s.site.z_sig2.end());
  j["psi"] = std::vector<double>(s.temporal.psi.begin(), s.temporal.psi.end());
  ordered_json gamma = ordered_json::array();
  for (arma::uword t = 0; t < s.temporal.gamma.n_rows; ++t) {
    gamma.push_back(std::vector<double>(s.temporal.gamma.row(t).begin(),
                                        s.temporal.gamma.row(t).end()));
  }
  j["gamma"] = gamma;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace daymax
