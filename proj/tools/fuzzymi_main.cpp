// fuzzymi - generation, scoring, alignment, bin sweeps and gradient checks
// for the fuzzy-histogram mutual-information toolkit.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fuzzymi/csv.hpp"
#include "fuzzymi/datagen.hpp"
#include "fuzzymi/gradcheck.hpp"
#include "fuzzymi/infometrics.hpp"
#include "fuzzymi/kernels.hpp"
#include "fuzzymi/optim.hpp"

namespace fs = std::filesystem;
using namespace fuzzymi;

namespace {

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// One run manifest next to the produced files: command, config echo,
// timestamp, output paths.
void write_run_manifest(const fs::path& path, const std::string& command,
                        const std::vector<std::pair<std::string, std::string>>& config,
                        const std::vector<std::string>& outputs) {
  std::string text = "key,value\ncommand," + command + "\n";
  for (const auto& [k, v] : config) text += k + "," + v + "\n";
  text += "timestamp," + iso_timestamp() + "\n";
  for (const std::string& o : outputs) text += "output," + o + "\n";
  csv::atomic_write(path, text);
}

Grid load_image(const std::string& path) { return load_pgm(fs::path(path)); }

// --- gen -------------------------------------------------------------

int cmd_gen(int count, std::uint64_t seed, const std::string& out_dir) {
  const fs::path dir(out_dir);
  const auto rows = gen_dataset(count, seed, dir);
  write_run_manifest(dir / "run_manifest.csv", "gen",
                     {{"count", std::to_string(count)},
                      {"seed", std::to_string(seed)},
                      {"out", out_dir}},
                     {(dir / kManifestName).string()});
  std::printf("wrote %zu pairs to %s\n", rows.size(), out_dir.c_str());
  return 0;
}

// --- score -----------------------------------------------------------

int cmd_score(const std::string& a_path, const std::string& b_path,
              const std::string& loss_name, int bins,
              const std::string& dump_hist) {
  const Grid a = load_image(a_path);
  const Grid b = load_image(b_path);
  const LossKind kind = loss_kind_from_name(loss_name);

  double value;
  if (kind == LossKind::mi) {
    const JointHistogram p = normalize(
        soft_hist_2d(a.samples(), b.samples(), bins, a.range_min(), a.range_max()));
    const auto [px, py] = marginals_from_joint(p);
    value = mutual_information(px, py, p);
  } else {
    value = evaluate_loss(kind, a, b, bins, /*with_grad=*/false).value;
  }
  std::printf("%s,%.6f\n", loss_name.c_str(), value);

  if (!dump_hist.empty()) {
    const JointHistogram joint = soft_hist_2d(a.samples(), b.samples(), bins,
                                              a.range_min(), a.range_max());
    csv::write_matrix(dump_hist, joint.counts, bins, bins);
    write_run_manifest(fs::path(dump_hist).string() + ".run_manifest.csv", "score",
                       {{"img_a", a_path},
                        {"img_b", b_path},
                        {"loss", loss_name},
                        {"bins", std::to_string(bins)}},
                       {dump_hist});
  }
  return 0;
}

// --- align -----------------------------------------------------------

std::vector<Pose2> parse_multistart(const std::string& text) {
  if (text.empty() || text == "default") return {};
  std::vector<Pose2> starts;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t sep = text.find(';', pos);
    const std::string item =
        text.substr(pos, sep == std::string::npos ? std::string::npos : sep - pos);
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw CLI::ValidationError("--multistart", "expected tx:theta[;tx:theta...]");
    starts.push_back(Pose2{std::stod(item.substr(0, colon)),
                           std::stod(item.substr(colon + 1))});
    if (sep == std::string::npos) break;
    pos = sep + 1;
  }
  return starts;
}

int cmd_align(const std::string& src_path, const std::string& tgt_path,
              const std::string& loss_name, int bins, const std::string& optimizer,
              double lr, int iters, const std::string& multistart, int keep,
              const std::string& trace_path) {
  const Grid src = load_image(src_path);
  const Grid tgt = load_image(tgt_path);

  OptimConfig cfg;
  cfg.loss = loss_kind_from_name(loss_name);
  cfg.bins = bins;
  cfg.learning_rate = lr;
  cfg.max_iters = iters;
  cfg.multistart = parse_multistart(multistart);
  cfg.multistart_keep = keep;
  if (optimizer == "adam")
    cfg.algorithm = Algorithm::adam;
  else if (optimizer == "gd")
    cfg.algorithm = Algorithm::gd;
  else
    throw CLI::ValidationError("--optimizer", "must be adam or gd");

  const auto [pose, trace] = align(src, tgt, cfg);
  std::printf("%.3f,%.3f,%.6f\n", pose.tx, pose.theta_deg, trace.final_loss);

  if (!trace_path.empty()) {
    csv::atomic_write(trace_path, trace.trace_csv());
    write_run_manifest(
        fs::path(trace_path).string() + ".run_manifest.csv", "align",
        {{"src", src_path},
         {"tgt", tgt_path},
         {"loss", loss_name},
         {"bins", std::to_string(bins)},
         {"optimizer", optimizer},
         {"lr", csv::format_value(lr)},
         {"iters", std::to_string(iters)},
         {"multistart", multistart.empty() ? "default" : multistart}},
        {trace_path});
  }
  return 0;
}

// --- sweep-bins --------------------------------------------------------

int cmd_sweep_bins(const std::string& dataset_dir, const std::string& bins_list,
                   const std::string& loss_name, int iters, int limit, int keep,
                   const std::string& out_path) {
  const fs::path dir(dataset_dir);
  if (!fs::exists(dir / kManifestName))
    throw CLI::ValidationError("dataset", "no manifest.csv in " + dataset_dir);
  auto rows = read_manifest(dir / kManifestName);
  if (rows.empty())
    throw CLI::ValidationError("dataset", "empty dataset in " + dataset_dir);
  if (limit > 0 && static_cast<int>(rows.size()) > limit)
    rows.resize(static_cast<std::size_t>(limit));

  std::vector<int> bins_values;
  for (std::size_t pos = 0; pos < bins_list.size();) {
    const std::size_t comma = bins_list.find(',', pos);
    bins_values.push_back(std::stoi(bins_list.substr(pos, comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (bins_values.empty())
    throw CLI::ValidationError("--bins-list", "no bin counts given");

  std::string out = "N,mae_tx,mae_theta\n";
  for (const int bins : bins_values) {
    double sum_tx = 0.0, sum_th = 0.0;
    for (const DatasetManifestRow& row : rows) {
      const Grid src = load_pgm(dir / row.src);
      const Grid tgt = load_pgm(dir / row.tgt);
      OptimConfig cfg;
      cfg.loss = loss_kind_from_name(loss_name);
      cfg.bins = bins;
      cfg.max_iters = iters;
      cfg.multistart_keep = keep;
      const auto [pose, trace] = align(src, tgt, cfg);
      (void)trace;
      sum_tx += std::abs(pose.tx - row.tx);
      sum_th += std::abs(pose.theta_deg - row.theta);
    }
    char line[96];
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f\n", bins,
                  sum_tx / rows.size(), sum_th / rows.size());
    out += line;
  }
  std::fputs(out.c_str(), stdout);

  if (!out_path.empty()) {
    csv::atomic_write(out_path, out);
    write_run_manifest(fs::path(out_path).string() + ".run_manifest.csv",
                       "sweep-bins",
                       {{"dataset", dataset_dir},
                        {"bins-list", bins_list},
                        {"loss", loss_name},
                        {"iters", std::to_string(iters)},
                        {"limit", std::to_string(limit)}},
                       {out_path});
  }
  return 0;
}

// --- gradcheck ----------------------------------------------------------

Grid random_grid(int w, int h, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  for (double& v : data) v = dist(rng);
  return Grid(w, h, std::move(data));
}

Grid box_blurred(const Grid& g, int passes) {
  std::vector<double> cur(g.samples().begin(), g.samples().end());
  const int w = g.width(), h = g.height();
  std::vector<double> next(cur.size());
  for (int p = 0; p < passes; ++p) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double sum = 0.0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
            sum += cur[static_cast<std::size_t>(yy) * w + xx];
            ++n;
          }
        next[static_cast<std::size_t>(y) * w + x] = sum / n;
      }
    cur.swap(next);
  }
  return Grid(w, h, std::move(cur), g.range_min(), g.range_max(), true);
}

int cmd_gradcheck(const std::string& op, int trials, std::uint64_t seed, int bins) {
  std::mt19937_64 rng(seed);
  GradReport total;

  for (int t = 0; t < trials; ++t) {
    if (op == "lmi") {
      const Grid target = random_grid(16, 16, rng, 0.0, 255.0);
      const Grid pred = random_grid(16, 16, rng, 0.0, 255.0);
      const LossReport rep = lmi_pair(target, pred, bins);
      const std::vector<std::uint8_t> mask = lmi_kink_mask(target, pred, bins);
      const auto loss = [&](std::span<const double> y) {
        const Grid p(16, 16, std::vector<double>(y.begin(), y.end()));
        return lmi_pair(target, p, bins, false).value;
      };
      const std::vector<double> numeric = finite_diff(loss, pred.samples(), 1e-3, mask);
      total.merge(compare(*rep.grad_wrt_prediction, numeric, 1e-12, 1e-4, mask));
    } else if (op == "ssim") {
      // stay clear of the range boundary so the probe never clamps
      const Grid target = random_grid(12, 12, rng, 1.0, 254.0);
      const Grid pred = random_grid(12, 12, rng, 1.0, 254.0);
      const LossReport rep = ssim_pair(target, pred);
      const auto loss = [&](std::span<const double> y) {
        const Grid p(12, 12, std::vector<double>(y.begin(), y.end()), 0.0, 255.0, true);
        return ssim_pair(target, p, false).value;
      };
      const std::vector<double> numeric = finite_diff(loss, pred.samples(), 1e-3);
      total.merge(compare(*rep.grad_wrt_prediction, numeric, 1e-11, 1e-5));
    } else if (op == "l1" || op == "l2") {
      const Grid target = random_grid(16, 16, rng, 1.0, 254.0);
      const Grid pred = random_grid(16, 16, rng, 1.0, 254.0);
      const bool is_l1 = op == "l1";
      const LossReport rep = is_l1 ? l1_pair(target, pred) : l2_pair(target, pred);
      const auto loss = [&](std::span<const double> y) {
        const Grid p(16, 16, std::vector<double>(y.begin(), y.end()), 0.0, 255.0, true);
        return (is_l1 ? l1_pair(target, p, false) : l2_pair(target, p, false)).value;
      };
      // linear/quadratic: central differences are exact in the step, so a
      // large step avoids cancellation noise
      const double step = 0.5;
      std::vector<std::uint8_t> mask(pred.size(), 0);
      if (is_l1)
        for (std::size_t i = 0; i < pred.size(); ++i)
          if (std::abs(pred.samples()[i] - target.samples()[i]) < 3.0 * step)
            mask[i] = 1;
      const std::vector<double> numeric = finite_diff(loss, pred.samples(), step, mask);
      // abs floor = finite-difference noise floor, far below any gradient
      total.merge(compare(*rep.grad_wrt_prediction, numeric, 1e-10, 1e-8, mask));
    } else if (op == "warp") {
      const Grid src = box_blurred(random_grid(24, 20, rng, 0.0, 255.0), 3);
      std::uniform_real_distribution<double> txd(-4.0, 4.0), thd(-12.0, 12.0);
      const double step = 1e-3;
      Pose2 pose{txd(rng), thd(rng)};
      bool clean = false;
      for (int tries = 0; tries < 200; ++tries) {
        if (warp_probe_is_kink_free(src, pose, step, step)) {
          clean = true;
          break;
        }
        pose = Pose2{txd(rng), thd(rng)};
      }
      if (!clean) {
        // probe straddles a bilinear cell boundary everywhere we looked
        total.num_skipped_kinks += 2;
        continue;
      }
      std::vector<double> weights(src.size());
      std::uniform_real_distribution<double> wd(-1.0, 1.0);
      for (double& v : weights) v = wd(rng);
      const PoseGradient pg = warp_backward(src, pose, weights);
      const auto loss = [&](std::span<const double> p) {
        const Grid out = warp_rigid(src, Pose2{p[0], p[1]});
        double s = 0.0, c = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
          const double x = weights[i] * out.samples()[i];
          const double y = x - c;
          const double tt = s + y;
          c = (tt - s) - y;
          s = tt;
        }
        return s;
      };
      const std::vector<double> point = {pose.tx, pose.theta_deg};
      const std::vector<double> numeric = finite_diff(loss, point, step);
      const std::vector<double> analytic = {pg.d_tx, pg.d_theta_deg};
      total.merge(compare(analytic, numeric, 1e-10, 1e-4));
    } else {
      throw CLI::ValidationError("--op", "unknown op '" + op + "'");
    }
  }

  std::fputs(total.table().c_str(), stdout);
  return total.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fuzzy-histogram mutual-information toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a bar-alignment dataset");
  int gen_count = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--count", gen_count, "number of pairs")->required();
  gen->add_option("--seed", gen_seed, "base seed")->required();
  gen->add_option("--out", gen_out, "output directory")->required();

  // score
  auto* score = app.add_subcommand("score", "score an image pair with one loss");
  std::string score_a, score_b, score_loss = "lmi", score_dump;
  int score_bins = 11;
  score->add_option("img_a", score_a, "first image (X)")->required();
  score->add_option("img_b", score_b, "second image (Y)")->required();
  score->add_option("--loss", score_loss, "l1|l2|ssim|lmi|mi");
  score->add_option("--bins", score_bins, "histogram bins");
  score->add_option("--dump-hist", score_dump, "write the joint histogram CSV here");

  // align
  auto* al = app.add_subcommand("align", "recover the pose warping src onto tgt");
  std::string al_src, al_tgt, al_loss = "lmi", al_opt = "adam", al_ms, al_trace;
  int al_bins = 11, al_iters = 150, al_keep = 0;
  double al_lr = 1.0;
  al->add_option("src", al_src, "source image")->required();
  al->add_option("tgt", al_tgt, "target image")->required();
  al->add_option("--loss", al_loss, "l1|l2|ssim|lmi|mi (mi maximizes; prints -MI)");
  al->add_option("--bins", al_bins, "histogram bins");
  al->add_option("--optimizer", al_opt, "adam|gd");
  al->add_option("--lr", al_lr, "learning rate");
  al->add_option("--iters", al_iters, "max iterations per start");
  al->add_option("--multistart", al_ms, "default | tx:theta[;tx:theta...]");
  al->add_option("--keep", al_keep, "fully optimize only the K best starts (0 = all)");
  al->add_option("--trace", al_trace, "write the winning start's trace CSV here");

  // sweep-bins
  auto* sweep = app.add_subcommand("sweep-bins", "alignment MAE per histogram size");
  std::string sw_dir, sw_bins = "3,11,15,25", sw_loss = "lmi", sw_out;
  int sw_iters = 150, sw_limit = 0, sw_keep = 0;
  sweep->add_option("dataset", sw_dir, "dataset directory (with manifest.csv)")->required();
  sweep->add_option("--bins-list", sw_bins, "comma-separated bin counts");
  sweep->add_option("--loss", sw_loss, "loss to align with");
  sweep->add_option("--iters", sw_iters, "max iterations per start");
  sweep->add_option("--limit", sw_limit, "use only the first K pairs (0 = all)");
  sweep->add_option("--keep", sw_keep, "fully optimize only the K best starts (0 = all)");
  sweep->add_option("--out", sw_out, "also write the CSV here");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "verify analytic gradients");
  std::string gc_op;
  int gc_trials = 20, gc_bins = 11;
  std::uint64_t gc_seed = 1;
  gc->add_option("--op", gc_op, "lmi|ssim|l1|l2|warp")->required();
  gc->add_option("--trials", gc_trials, "number of random trials");
  gc->add_option("--seed", gc_seed, "rng seed");
  gc->add_option("--bins", gc_bins, "histogram bins (lmi)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen(gen_count, gen_seed, gen_out);
    if (*score) return cmd_score(score_a, score_b, score_loss, score_bins, score_dump);
    if (*al)
      return cmd_align(al_src, al_tgt, al_loss, al_bins, al_opt, al_lr, al_iters,
                       al_ms, al_keep, al_trace);
    if (*sweep)
      return cmd_sweep_bins(sw_dir, sw_bins, sw_loss, sw_iters, sw_limit, sw_keep,
                            sw_out);
    if (*gc) return cmd_gradcheck(gc_op, gc_trials, gc_seed, gc_bins);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
