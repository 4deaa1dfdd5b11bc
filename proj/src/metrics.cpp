#include "daymax/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace daymax {

double crps_cell_reference(const arma::vec& reps, double truth) {
  const arma::uword B = reps.n_elem;
  if (B == 0) throw DataError("crps: empty ensemble");
  double t1 = 0.0;
  for (arma::uword b = 0; b < B; ++b) t1 += std::abs(reps[b] - truth);
  double t2 = 0.0;
  for (arma::uword b1 = 0; b1 < B; ++b1) {
    for (arma::uword b2 = 0; b2 < B; ++b2) t2 += std::abs(reps[b1] - reps[b2]);
  }
  return t1 / double(B) - t2 / (2.0 * double(B) * double(B));
}

double crps_cell(const arma::vec& reps, double truth) {
  const arma::uword B = reps.n_elem;
  if (B == 0) throw DataError("crps: empty ensemble");
  arma::vec x = arma::sort(reps);
  double t1 = 0.0, gini = 0.0;
  for (arma::uword k = 0; k < B; ++k) {
    t1 += std::abs(x[k] - truth);
    gini += (2.0 * double(k) - double(B) + 1.0) * x[k];
  }
  return t1 / double(B) - gini / (double(B) * double(B));
}

SiteScore score_site(const PredictiveSamples& pred, const PanelDataset& truth,
                     int site_index, bool parallel) {
  if (pred.B() == 0) throw DataError("score_site: no replicates");
  if (site_index < 0 || site_index >= truth.I()) {
    throw DataError("score_site: site index out of range");
  }
  const long n_cells = static_cast<long>(pred.cells.size());
  std::vector<std::uint8_t> scored(n_cells, 0);
  std::vector<double> se(n_cells, 0.0), ae(n_cells, 0.0), cr(n_cells, 0.0),
      cov(n_cells, 0.0);

#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (long c = 0; c < n_cells; ++c) {
    const PredictiveCell cell = pred.cells[c];
    if (cell.l < 1) continue;  // day 1 is a conditioning value, never scored
    if (cell.t < 0 || cell.t >= truth.T || cell.l >= truth.L) continue;
    if (truth.missing(cell.t, cell.l, site_index)) continue;
    const double y = truth.value(cell.t, cell.l, site_index);
    const arma::vec reps = pred.replicates.col(c);
    const double yhat = arma::mean(reps);
    se[c] = (yhat - y) * (yhat - y);
    ae[c] = std::abs(yhat - y);
    cr[c] = crps_cell(reps, y);
    const double lo = quantile_type7(reps, 0.05);
    const double hi = quantile_type7(reps, 0.95);
    cov[c] = (lo <= y && y <= hi) ? 1.0 : 0.0;
    scored[c] = 1;
  }

  // Fixed-order reduction so results do not depend on the thread count.
  SiteScore s;
  s.site_id = truth.sites[site_index].id;
  double sse = 0.0, sae = 0.0, scr = 0.0, scov = 0.0;
  for (long c = 0; c < n_cells; ++c) {
    if (!scored[c]) continue;
    sse += se[c];
    sae += ae[c];
    scr += cr[c];
    scov += cov[c];
    ++s.cells;
  }
  if (s.cells == 0) throw DataError("score_site: no scorable cells");
  s.rmse = std::sqrt(sse / s.cells);
  s.mae = sae / s.cells;
  s.crps = scr / s.cells;
  s.cvg = scov / s.cells;
  return s;
}

std::vector<ModelVariant> loocv_default_variants() {
  return {
      ModelVariant::parse("M0"),
      ModelVariant::parse("M1:beta0"),
      ModelVariant::parse("M1:alpha"),
      ModelVariant::parse("M1:rho"),
      ModelVariant::parse("M1:sigma"),
      ModelVariant::parse("M2:beta0,sigma"),
      ModelVariant::parse("M3:beta0,alpha,sigma"),
      ModelVariant::parse("M3:alpha,rho,sigma"),
      ModelVariant::parse("M4"),
  };
}

LoocvResult run_loocv(const PanelDataset& data, const HyperPriors& priors,
                      const std::vector<ModelVariant>& variants,
                      const LoocvConfig& cfg) {
  if (data.I() < 2) throw DataError("run_loocv: needs at least two sites");
  LoocvResult out;
  long fold = 0;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const std::string vname = variants[v].to_string();
    double sums[4] = {0, 0, 0, 0};
    long ok_count = 0;
    for (int i = 0; i < data.I(); ++i, ++fold) {
      LoocvRow row;
      row.variant = vname;
      row.site = data.sites[i].id;
      try {
        const PanelDataset train = data.drop_site(i);
        FitOptions opts = cfg.base_opts;
        opts.variant = variants[v];
        ChainConfig cc = cfg.chain_cfg;
        cc.seed = cfg.chain_cfg.seed ^ (static_cast<std::uint64_t>(fold + 1) << 32);
        const std::vector<ChainOutput> chains =
            fit_chains(train, priors, opts, cc, cfg.n_chains);
        PredictOptions popts;
        popts.B = cfg.B;
        popts.seed = cc.seed ^ 0x5bd1e995u;
        const PredictiveSamples pred =
            predict_panel(chains, data.sites[i], train, popts);
        const SiteScore s = score_site(pred, data, i);
        row.rmse = s.rmse;
        row.mae = s.mae;
        row.crps = s.crps;
        row.cvg = s.cvg;
        sums[0] += s.rmse;
        sums[1] += s.mae;
        sums[2] += s.crps;
        sums[3] += s.cvg;
        ++ok_count;
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      out.rows.push_back(row);
    }
    LoocvRow mean_row;
    mean_row.variant = vname;
    mean_row.site = "mean";
    if (ok_count > 0) {
      mean_row.rmse = sums[0] / ok_count;
      mean_row.mae = sums[1] / ok_count;
      mean_row.crps = sums[2] / ok_count;
      mean_row.cvg = sums[3] / ok_count;
    } else {
      mean_row.failed = true;
      mean_row.error = "all folds failed";
    }
    out.mean_rows.push_back(mean_row);
  }
  return out;
}

namespace {

struct WindowStats {
  double mean = 0.0;
  double sd = 0.0;
  long n = 0;
};

void check_window(int begin, int end, int T, const char* name) {
  if (begin < 1 || end > T || begin > end) {
    throw DataError(std::string("change_summary: ") + name + " outside 1..T");
  }
}

}  // namespace

ChangeSummary change_summary(const PanelDataset& data, int site_index, int w1_begin,
                             int w1_end, int w2_begin, int w2_end) {
  check_window(w1_begin, w1_end, data.T, "window1");
  check_window(w2_begin, w2_end, data.T, "window2");
  auto stats = [&](int begin, int end) {
    WindowStats st;
    double sum = 0.0, sum2 = 0.0;
    for (int t = begin - 1; t < end; ++t) {
      for (int l = 0; l < data.L; ++l) {
        if (data.missing(t, l, site_index)) continue;
        const double y = data.value(t, l, site_index);
        sum += y;
        sum2 += y * y;
        ++st.n;
      }
    }
    if (st.n == 0) throw DataError("change_summary: empty window");
    st.mean = sum / st.n;
    st.sd = st.n > 1 ? std::sqrt((sum2 - sum * sum / st.n) / (st.n - 1)) : 0.0;
    return st;
  };
  const WindowStats a = stats(w1_begin, w1_end);
  const WindowStats b = stats(w2_begin, w2_end);
  if (!(a.sd > 0.0)) throw DataError("change_summary: window1 has zero spread");
  ChangeSummary out;
  out.delta_mean = b.mean - a.mean;
  out.q_sd = b.sd / a.sd;
  return out;
}

ChangeSummary change_summary(const PredictiveSamples& pred, int w1_begin, int w1_end,
                             int w2_begin, int w2_end) {
  check_window(w1_begin, w1_end, pred.T, "window1");
  check_window(w2_begin, w2_end, pred.T, "window2");
  const long B = pred.B();
  if (B == 0) throw DataError("change_summary: no replicates");
  ChangeSummary out;
  out.delta_draws.set_size(B);
  arma::vec qsd(B);
  for (long b = 0; b < B; ++b) {
    double s1 = 0.0, s1sq = 0.0, s2 = 0.0, s2sq = 0.0;
    long n1 = 0, n2 = 0;
    for (std::size_t c = 0; c < pred.cells.size(); ++c) {
      const int year = pred.cells[c].t + 1;
      const double y = pred.replicates(b, c);
      if (year >= w1_begin && year <= w1_end) {
        s1 += y;
        s1sq += y * y;
        ++n1;
      }
      if (year >= w2_begin && year <= w2_end) {
        s2 += y;
        s2sq += y * y;
        ++n2;
      }
    }
    if (n1 == 0 || n2 == 0) throw DataError("change_summary: empty window");
    const double m1 = s1 / n1, m2 = s2 / n2;
    const double sd1 = n1 > 1 ? std::sqrt((s1sq - s1 * s1 / n1) / (n1 - 1)) : 0.0;
    const double sd2 = n2 > 1 ? std::sqrt((s2sq - s2 * s2 / n2) / (n2 - 1)) : 0.0;
    out.delta_draws[b] = m2 - m1;
    qsd[b] = sd1 > 0.0 ? sd2 / sd1 : 1.0;
  }
  out.delta_mean = arma::mean(out.delta_draws);
  out.q_sd = arma::mean(qsd);
  out.prob_positive = arma::mean(arma::conv_to<arma::vec>::from(out.delta_draws > 0.0));
  return out;
}

}  // namespace daymax
