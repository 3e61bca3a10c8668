// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Heavier than the unit suites; expect a few minutes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "fuzzymi/csv.hpp"
#include "fuzzymi/datagen.hpp"
#include "fuzzymi/gradcheck.hpp"
#include "fuzzymi/infometrics.hpp"
#include "fuzzymi/optim.hpp"
#include "fuzzymi/softhist.hpp"

using namespace fuzzymi;
using clk = std::chrono::steady_clock;

namespace {

struct Criterion {
  bool pass = true;
  std::string details;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      if (!details.empty()) details += "; ";
      details += why;
    }
  }
  void note(const std::string& text) {
    if (!details.empty()) details += "; ";
    details += text;
  }
};

double seconds_since(clk::time_point t0) {
  return std::chrono::duration<double>(clk::now() - t0).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

Grid random_grid(int w, int h, std::mt19937_64& rng, double lo = 0.0,
                 double hi = 255.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  for (double& v : data) v = dist(rng);
  return Grid(w, h, std::move(data));
}

JointHistogram random_joint(int bins, std::mt19937_64& rng) {
  JointHistogram j;
  j.bins = bins;
  j.counts.resize(static_cast<std::size_t>(bins) * bins);
  std::uniform_real_distribution<double> dist(0.01, 1.0);
  for (double& v : j.counts) v = dist(rng);
  return normalize(j);
}

Histogram1D random_pdf(int bins, std::mt19937_64& rng) {
  Histogram1D h;
  h.counts.resize(bins);
  std::uniform_real_distribution<double> dist(0.05, 1.0);
  for (double& v : h.counts) v = dist(rng);
  return normalize(h);
}

// ---------------------------------------------------------------------------
// 1. Analytic LMI per-pixel gradients vs central finite differences over
//    100 random 16x16 pairs at N in {3, 11, 25}; kinks masked and reported.
Criterion criterion1() {
  Criterion c;
  const auto t0 = clk::now();
  std::mt19937_64 rng(1001);
  GradReport total;
  for (int trial = 0; trial < 100; ++trial) {
    const Grid target = random_grid(16, 16, rng);
    const Grid pred = random_grid(16, 16, rng);
    for (const int bins : {3, 11, 25}) {
      const LossReport rep = lmi_pair(target, pred, bins);
      const std::vector<std::uint8_t> mask = lmi_kink_mask(target, pred, bins);
      const auto loss = [&](std::span<const double> y) {
        const Grid p(16, 16, std::vector<double>(y.begin(), y.end()));
        return lmi_pair(target, p, bins, false).value;
      };
      const std::vector<double> numeric = finite_diff(loss, pred.samples(), 1e-3, mask);
      total.merge(compare(*rep.grad_wrt_prediction, numeric, 1e-12, 1e-4, mask));
    }
  }
  const double elapsed = seconds_since(t0);
  const double skipped_frac =
      static_cast<double>(total.num_skipped_kinks) /
      static_cast<double>(total.num_checked + total.num_skipped_kinks);
  c.require(total.all_passed(), fmt("%zu coordinate failures", total.num_failed));
  c.require(total.max_rel_error < 1e-4, fmt("max_rel=%.3e", total.max_rel_error));
  c.require(skipped_frac < 0.05, fmt("skipped=%.1f%%", 100.0 * skipped_frac));
  c.require(elapsed < 60.0, fmt("runtime=%.1fs", elapsed));
  c.note(fmt("max_rel=%.2e skipped=%.2f%% runtime=%.1fs", total.max_rel_error,
             100.0 * skipped_frac, elapsed));
  return c;
}

// ---------------------------------------------------------------------------
// 2. LMI bounds and the zero-iff-diagonal equality, both directions.
Criterion criterion2(std::vector<JointHistogram>& joints_out) {
  Criterion c;
  const auto t0 = clk::now();
  std::mt19937_64 rng(2002);
  for (int trial = 0; trial < 1000; ++trial) {
    const int bins = 2 + static_cast<int>(rng() % 15);
    const JointHistogram j = random_joint(bins, rng);
    const double v = lmi(j);
    c.require(v >= 0.0 && v <= 1.0, fmt("lmi %.17g outside [0,1]", v));
    c.require(v >= 1e-12, "off-diagonal joint scored as perfect match");
    joints_out.push_back(j);
  }
  for (int trial = 0; trial < 200; ++trial) {
    const int bins = 2 + static_cast<int>(rng() % 15);
    const Histogram1D pdf = random_pdf(bins, rng);
    JointHistogram diag;
    diag.bins = bins;
    diag.counts.assign(static_cast<std::size_t>(bins) * bins, 0.0);
    for (int i = 0; i < bins; ++i) diag.at(i, i) = pdf.counts[i];
    diag.normalized = true;
    c.require(lmi(diag) < 1e-12, "diagonal joint did not score zero");
    joints_out.push_back(diag);
  }
  const double elapsed = seconds_since(t0);
  c.require(elapsed < 5.0, fmt("runtime=%.2fs", elapsed));
  c.note(fmt("1200 joints, runtime=%.2fs", elapsed));
  return c;
}

// ---------------------------------------------------------------------------
// 3. Diagonal-mass bound on every criterion-2 joint.
Criterion criterion3(const std::vector<JointHistogram>& joints) {
  Criterion c;
  double worst = 0.0;
  for (const JointHistogram& j : joints) {
    double trace = 0.0;
    for (int i = 0; i < j.bins; ++i) trace += j.at(i, i);
    worst = std::max(worst, trace);
    c.require(trace <= 1.0 + 1e-12, fmt("diagonal mass %.17g", trace));
  }
  c.note(fmt("max diagonal mass %.12f over %zu joints", worst, joints.size()));
  return c;
}

// ---------------------------------------------------------------------------
// 4. Histogram mass conservation and marginal consistency.
Criterion criterion4() {
  Criterion c;
  std::mt19937_64 rng(4004);
  double worst_mass = 0.0, worst_marg = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 50 + static_cast<std::size_t>(rng() % 1950);
    const int bins = 2 + static_cast<int>(rng() % 24);
    std::uniform_real_distribution<double> dist(0.0, 255.0);
    std::vector<double> xs(m), ys(m);
    for (double& v : xs) v = dist(rng);
    for (double& v : ys) v = dist(rng);

    const JointHistogram j = soft_hist_2d(xs, ys, bins, 0.0, 255.0);
    const double mass_err = std::abs(j.total() - static_cast<double>(m));
    worst_mass = std::max(worst_mass, mass_err / m);
    c.require(mass_err <= 1e-9 * m, fmt("mass error %.3e at M=%zu", mass_err, m));

    const Histogram1D hx = soft_hist_1d(xs, bins, 0.0, 255.0);
    const Histogram1D hy = soft_hist_1d(ys, bins, 0.0, 255.0);
    for (int i = 0; i < bins; ++i) {
      double row = 0.0, col = 0.0;
      for (int k = 0; k < bins; ++k) {
        row += j.at(i, k);
        col += j.at(k, i);
      }
      worst_marg = std::max({worst_marg, std::abs(row - hx.counts[i]),
                             std::abs(col - hy.counts[i])});
    }
    c.require(worst_marg <= 1e-9, fmt("marginal error %.3e", worst_marg));
  }
  c.note(fmt("worst relative mass error %.2e, worst marginal error %.2e",
             worst_mass, worst_marg));
  return c;
}

// ---------------------------------------------------------------------------
// 5. Hard-histogram equivalence at integral bin coordinates, zero tolerance.
Criterion criterion5() {
  Criterion c;
  std::mt19937_64 rng(5005);
  for (const int bins : {2, 5, 11, 16, 25}) {
    // range [0, 8N] with samples 8k makes xb = k exact in ieee arithmetic
    // (bin width 8 and its reciprocal are powers of two)
    const double range_max = 8.0 * bins;
    std::vector<double> samples;
    std::vector<double> expected(bins, 0.0);
    for (int k = 0; k < bins; ++k) {
      const int copies = 1 + static_cast<int>(rng() % 7);
      for (int i = 0; i < copies; ++i) samples.push_back(8.0 * k);
      expected[k] = copies;
    }
    const Histogram1D h = soft_hist_1d(samples, bins, 0.0, range_max);
    for (int k = 0; k < bins; ++k)
      c.require(h.counts[k] == expected[k],
                fmt("N=%d bin %d: %.17g != %.17g", bins, k, h.counts[k], expected[k]));

    const JointHistogram j = soft_hist_2d(samples, samples, bins, 0.0, range_max);
    for (int a = 0; a < bins; ++a)
      for (int b = 0; b < bins; ++b)
        c.require(j.at(a, b) == (a == b ? expected[a] : 0.0),
                  fmt("N=%d joint cell (%d,%d) off", bins, a, b));
  }
  c.note("1-D and 2-D exact at integral coordinates for N in {2,5,11,16,25}");
  return c;
}

// ---------------------------------------------------------------------------
// 6. Bar-alignment surrogate: recovery, oracle certification, runtime, and
//    the pose-MAE comparison against the pointwise losses.
Criterion criterion6() {
  Criterion c;
  const int pairs = 50;
  int recovered = 0, certified = 0;
  double worst_pair_seconds = 0.0;
  double mae_tx[3] = {0.0, 0.0, 0.0};
  double mae_th[3] = {0.0, 0.0, 0.0};
  const LossKind kinds[3] = {LossKind::lmi, LossKind::l1, LossKind::l2};

  for (int i = 0; i < pairs; ++i) {
    const BarSample s = gen_bar_pair(static_cast<std::uint64_t>(i));
    for (int k = 0; k < 3; ++k) {
      OptimConfig cfg;
      cfg.loss = kinds[k];
      cfg.bins = 11;
      cfg.max_iters = 150;
      cfg.multistart_keep = 6;
      const auto pair_t0 = clk::now();
      const auto [pose, trace] = align(s.source, s.target, cfg);
      (void)trace;
      mae_tx[k] += std::abs(pose.tx - s.gt_pose.tx) / pairs;
      mae_th[k] += std::abs(pose.theta_deg - s.gt_pose.theta_deg) / pairs;
      if (k == 0) {
        const bool hit = std::abs(pose.tx - s.gt_pose.tx) <= 2.0 &&
                         std::abs(pose.theta_deg - s.gt_pose.theta_deg) <= 1.0;
        const GridSearchResult oracle = grid_search_oracle(
            s.source, s.target, LossKind::lmi,
            GridRange{pose.tx - 3.0, pose.tx + 3.0, 1.0},
            GridRange{pose.theta_deg - 1.5, pose.theta_deg + 1.5, 0.5}, 11);
        const bool agree = std::abs(oracle.best.tx - pose.tx) <= 1.0 &&
                           std::abs(oracle.best.theta_deg - pose.theta_deg) <= 0.5;
        worst_pair_seconds = std::max(worst_pair_seconds, seconds_since(pair_t0));
        if (hit && agree) {
          ++recovered;
          ++certified;
        }
      }
    }
  }

  c.require(recovered >= 45,
            fmt("only %d/%d pairs recovered within (2px,1deg)", recovered, pairs));
  c.require(certified == recovered, "oracle disagreed on a recovered pair");
  c.require(worst_pair_seconds < 10.0,
            fmt("slowest pair %.1fs (budget 10s)", worst_pair_seconds));
  // comparative claim: histogram loss at least as precise as the pointwise
  // losses on these pairs
  c.require(mae_tx[0] <= mae_tx[1] && mae_th[0] <= mae_th[1],
            fmt("lmi MAE (%.3f px, %.3f deg) worse than l1 (%.3f px, %.3f deg)",
                mae_tx[0], mae_th[0], mae_tx[1], mae_th[1]));
  c.require(mae_tx[0] <= mae_tx[2] && mae_th[0] <= mae_th[2],
            fmt("lmi MAE (%.3f px, %.3f deg) worse than l2 (%.3f px, %.3f deg)",
                mae_tx[0], mae_th[0], mae_tx[2], mae_th[2]));
  c.note(fmt("recovered %d/%d, certified %d, slowest lmi pair %.1fs, "
             "MAE lmi (%.3f, %.3f) l1 (%.3f, %.3f) l2 (%.3f, %.3f)",
             recovered, pairs, certified, worst_pair_seconds, mae_tx[0], mae_th[0],
             mae_tx[1], mae_th[1], mae_tx[2], mae_th[2]));
  return c;
}

// ---------------------------------------------------------------------------
// 7. Bin sweep on grayscale pairs: complete finite CSV; N=3 degrades.
Grid gray_scene(int w, int h) {
  // low-contrast levels chosen to share one N=3 bin, so coarse binning
  // erases the structure that N=11 still separates
  std::vector<double> data(static_cast<std::size_t>(w) * h, 100.0);
  auto put_rect = [&](int cx, int cy, int bw, int bh, double v) {
    for (int y = cy - bh / 2; y < cy + bh / 2; ++y)
      for (int x = cx - bw / 2; x < cx + bw / 2; ++x)
        data[static_cast<std::size_t>(y) * w + x] = v;
  };
  put_rect(w / 2, h / 2, w / 3, h / 4, 160.0);
  put_rect(w / 2 + w / 10, h / 2, w / 12, h / 8, 125.0);
  std::vector<double> out(data.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
          s += data[static_cast<std::size_t>(yy) * w + xx];
          ++n;
        }
      out[static_cast<std::size_t>(y) * w + x] = s / n;
    }
  return Grid(w, h, std::move(out));
}

Criterion criterion7() {
  Criterion c;
  const Grid base = gray_scene(320, 96);
  const int pairs = 8;
  std::string csv = "N,mae_tx,mae_theta\n";
  double mae_by_n[4][2] = {};
  const int bins_list[4] = {3, 11, 15, 25};
  for (int bi = 0; bi < 4; ++bi) {
    double sum_tx = 0.0, sum_th = 0.0;
    for (int i = 0; i < pairs; ++i) {
      SplitMix64 rng(900 + static_cast<std::uint64_t>(i));
      const Pose2 gt{rng.uniform(-30.0, 30.0), rng.uniform(-15.0, 15.0)};
      const Grid tgt = warp_rigid(base, gt);
      OptimConfig cfg;
      cfg.loss = LossKind::lmi;
      cfg.bins = bins_list[bi];
      cfg.max_iters = 120;
      cfg.multistart_keep = 5;
      const auto [pose, trace] = align(base, tgt, cfg);
      (void)trace;
      sum_tx += std::abs(pose.tx - gt.tx) / pairs;
      sum_th += std::abs(pose.theta_deg - gt.theta_deg) / pairs;
    }
    mae_by_n[bi][0] = sum_tx;
    mae_by_n[bi][1] = sum_th;
    csv += fmt("%d,%.6f,%.6f\n", bins_list[bi], sum_tx, sum_th);
    c.require(std::isfinite(sum_tx) && std::isfinite(sum_th),
              fmt("non-finite MAE at N=%d", bins_list[bi]));
  }
  csv::atomic_write("acceptance_sweep.csv", csv);
  c.require(std::count(csv.begin(), csv.end(), '\n') == 5, "incomplete sweep CSV");
  c.require(mae_by_n[0][0] >= mae_by_n[1][0] && mae_by_n[0][1] >= mae_by_n[1][1],
            fmt("no degradation at N=3: (%.4f, %.4f) vs N=11 (%.4f, %.4f)",
                mae_by_n[0][0], mae_by_n[0][1], mae_by_n[1][0], mae_by_n[1][1]));
  c.note(fmt("MAE(tx,theta): N=3 (%.4f, %.4f) N=11 (%.4f, %.4f) N=15 (%.4f, %.4f) "
             "N=25 (%.4f, %.4f); CSV acceptance_sweep.csv",
             mae_by_n[0][0], mae_by_n[0][1], mae_by_n[1][0], mae_by_n[1][1],
             mae_by_n[2][0], mae_by_n[2][1], mae_by_n[3][0], mae_by_n[3][1]));
  return c;
}

// ---------------------------------------------------------------------------
// 8. Mutual-information sanity: I(X;X) = H(X), independent joints score 0.
Criterion criterion8() {
  Criterion c;
  std::mt19937_64 rng(8008);
  double worst_self = 0.0, worst_indep = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int bins = 2 + static_cast<int>(rng() % 15);
    const Histogram1D px = random_pdf(bins, rng);
    JointHistogram diag;
    diag.bins = bins;
    diag.counts.assign(static_cast<std::size_t>(bins) * bins, 0.0);
    for (int i = 0; i < bins; ++i) diag.at(i, i) = px.counts[i];
    diag.normalized = true;
    worst_self = std::max(worst_self,
                          std::abs(mutual_information(px, px, diag) - entropy(px)));

    const Histogram1D py = random_pdf(bins, rng);
    JointHistogram indep;
    indep.bins = bins;
    indep.counts.resize(static_cast<std::size_t>(bins) * bins);
    for (int a = 0; a < bins; ++a)
      for (int b = 0; b < bins; ++b) indep.at(a, b) = px.counts[a] * py.counts[b];
    indep.normalized = true;
    worst_indep = std::max(worst_indep, std::abs(mutual_information(px, py, indep)));
  }
  c.require(worst_self <= 1e-9, fmt("I(X;X) vs H(X) error %.3e", worst_self));
  c.require(worst_indep <= 1e-9, fmt("independent MI %.3e", worst_indep));
  c.note(fmt("worst |I(X;X)-H| %.2e, worst independent MI %.2e", worst_self,
             worst_indep));
  return c;
}

// ---------------------------------------------------------------------------
// 9. Baseline losses: exact zero on identical pairs; gradcheck tolerances.
Criterion criterion9() {
  Criterion c;
  std::mt19937_64 rng(9009);

  const Grid same = random_grid(12, 12, rng, 1.0, 254.0);
  for (const LossReport& rep : {l1_pair(same, same), l2_pair(same, same)}) {
    c.require(rep.value == 0.0, "nonzero loss on identical pair");
    for (double g : *rep.grad_wrt_prediction)
      c.require(g == 0.0, "nonzero gradient on identical pair");
  }
  const LossReport srep = ssim_pair(same, same);
  c.require(std::abs(srep.value) < 1e-15, "nonzero ssim loss on identical pair");
  for (double g : *srep.grad_wrt_prediction)
    c.require(std::abs(g) < 1e-18, "nonzero ssim gradient on identical pair");

  GradReport l1r, l2r, ssimr;
  for (int trial = 0; trial < 100; ++trial) {
    const Grid target = random_grid(16, 16, rng, 1.0, 254.0);
    const Grid pred = random_grid(16, 16, rng, 1.0, 254.0);

    const double step = 0.5;  // exact for piecewise-linear / quadratic losses
    std::vector<std::uint8_t> l1_mask(pred.size(), 0);
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (std::abs(pred.samples()[i] - target.samples()[i]) < 3.0 * step)
        l1_mask[i] = 1;
    const auto l1_loss = [&](std::span<const double> y) {
      return l1_pair(target, Grid(16, 16, std::vector<double>(y.begin(), y.end())),
                     false)
          .value;
    };
    l1r.merge(compare(*l1_pair(target, pred).grad_wrt_prediction,
                      finite_diff(l1_loss, pred.samples(), step, l1_mask), 1e-10,
                      1e-8, l1_mask));

    const auto l2_loss = [&](std::span<const double> y) {
      return l2_pair(target, Grid(16, 16, std::vector<double>(y.begin(), y.end())),
                     false)
          .value;
    };
    l2r.merge(compare(*l2_pair(target, pred).grad_wrt_prediction,
                      finite_diff(l2_loss, pred.samples(), step), 1e-10, 1e-8));

    const Grid starget = random_grid(12, 12, rng, 1.0, 254.0);
    const Grid spred = random_grid(12, 12, rng, 1.0, 254.0);
    const auto ssim_loss = [&](std::span<const double> y) {
      return ssim_pair(starget,
                       Grid(12, 12, std::vector<double>(y.begin(), y.end())), false)
          .value;
    };
    ssimr.merge(compare(*ssim_pair(starget, spred).grad_wrt_prediction,
                        finite_diff(ssim_loss, spred.samples(), 1e-3), 1e-11, 1e-5));
  }
  c.require(l1r.all_passed() && l1r.max_rel_error < 1e-8,
            fmt("l1 max_rel=%.3e", l1r.max_rel_error));
  c.require(l2r.all_passed() && l2r.max_rel_error < 1e-8,
            fmt("l2 max_rel=%.3e", l2r.max_rel_error));
  c.require(ssimr.all_passed() && ssimr.max_rel_error < 1e-5,
            fmt("ssim max_rel=%.3e", ssimr.max_rel_error));
  c.note(fmt("max_rel l1 %.2e l2 %.2e ssim %.2e", l1r.max_rel_error,
             l2r.max_rel_error, ssimr.max_rel_error));
  return c;
}

void report(int index, const char* title, const Criterion& c, int& failures) {
  if (!c.pass) ++failures;
  std::printf("criterion %d [%s] %s: %s\n", index, c.pass ? "pass" : "FAIL", title,
              c.details.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  int failures = 0;
  std::vector<JointHistogram> joints;

  report(1, "LMI gradient fidelity vs finite differences", criterion1(), failures);
  report(2, "LMI bounds and zero-iff-diagonal equality", criterion2(joints), failures);
  report(3, "diagonal mass bounded by one", criterion3(joints), failures);
  report(4, "histogram mass conservation and marginal consistency", criterion4(),
         failures);
  report(5, "hard-histogram equivalence at integral coordinates", criterion5(),
         failures);
  report(6, "bar-alignment surrogate with oracle certification", criterion6(),
         failures);
  report(7, "bin sweep on grayscale pairs", criterion7(), failures);
  report(8, "mutual-information sanity", criterion8(), failures);
  report(9, "baseline losses: zeros and gradient checks", criterion9(), failures);

  if (failures == 0)
    std::printf("acceptance: all 9 criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
