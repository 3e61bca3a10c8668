#include "fuzzymi/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "fuzzymi/grid.hpp"
#include "fuzzymi/softhist.hpp"
#include "fuzzymi/warp.hpp"

namespace fuzzymi {

void GradReport::merge(const GradReport& other) {
  if (other.max_abs_error > max_abs_error) max_abs_error = other.max_abs_error;
  if (other.max_rel_error > max_rel_error) {
    max_rel_error = other.max_rel_error;
    worst_coordinate = other.worst_coordinate;
  }
  num_checked += other.num_checked;
  num_skipped_kinks += other.num_skipped_kinks;
  num_failed += other.num_failed;
}

std::string GradReport::table() const {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "%-16s %12zu\n%-16s %12zu\n%-16s %12zu\n%-16s %12.3e\n"
                "%-16s %12.3e\n%-16s %12td\n%-16s %12s\n",
                "checked", num_checked, "skipped_kinks", num_skipped_kinks,
                "failed", num_failed, "max_abs_error", max_abs_error,
                "max_rel_error", max_rel_error, "worst_coord", worst_coordinate,
                "result", all_passed() ? "pass" : "FAIL");
  return buf;
}

std::string GradReport::csv() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "max_abs_error,max_rel_error,worst_coordinate,num_checked,"
                "num_skipped_kinks,num_failed\n%.17g,%.17g,%td,%zu,%zu,%zu\n",
                max_abs_error, max_rel_error, worst_coordinate, num_checked,
                num_skipped_kinks, num_failed);
  return buf;
}

std::vector<double> finite_diff(const ScalarFn& f, std::span<const double> point,
                                double step, std::span<const std::uint8_t> skip) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff: step must be positive");
  if (!skip.empty() && skip.size() != point.size())
    throw std::invalid_argument("finite_diff: skip mask length mismatch");
  std::vector<double> p(point.begin(), point.end());
  std::vector<double> grad(point.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!skip.empty() && skip[i]) continue;
    const double saved = p[i];
    p[i] = saved + step;
    const double fp = f(p);
    p[i] = saved - step;
    const double fm = f(p);
    p[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::invalid_argument("finite_diff: non-finite evaluation");
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

std::vector<std::uint8_t> lmi_kink_mask(const Grid& target, const Grid& prediction,
                                        int bins, double frac_margin,
                                        double tie_margin) {
  const JointHistogram joint =
      normalize(soft_hist_2d(target.samples(), prediction.samples(), bins,
                             target.range_min(), target.range_max()));
  const auto [px, py] = marginals_from_joint(joint);
  std::vector<std::uint8_t> row_tie(bins, 0), col_tie(bins, 0);
  for (int d = 0; d < bins; ++d) {
    const double pdd = joint.at(d, d);
    row_tie[d] = std::abs(pdd - px.counts[d]) < tie_margin ? 1 : 0;
    col_tie[d] = std::abs(pdd - py.counts[d]) < tie_margin ? 1 : 0;
  }

  const double inv = bins / target.range_span();
  std::vector<std::uint8_t> mask(prediction.size(), 0);
  for (std::size_t k = 0; k < prediction.size(); ++k) {
    const double raw = (prediction.samples()[k] - target.range_min()) * inv;
    const double dist = std::abs(raw - std::round(raw));
    if (dist < frac_margin) {
      mask[k] = 1;
      continue;
    }
    const BinAssignment ya =
        bin_coordinates(prediction.samples()[k], target.range_min(),
                        target.range_max(), bins);
    const BinAssignment xa =
        bin_coordinates(target.samples()[k], target.range_min(),
                        target.range_max(), bins);
    if (row_tie[xa.x0] || row_tie[xa.x1] || col_tie[ya.x0] || col_tie[ya.x1])
      mask[k] = 1;
  }
  return mask;
}

bool warp_probe_is_kink_free(const Grid& src, const Pose2& pose,
                             double step_tx, double step_theta_deg) {
  const double theta = pose.theta_deg * std::numbers::pi / 180.0;
  const double step_theta = step_theta_deg * std::numbers::pi / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cx = (src.width() - 1) * 0.5;
  const double cy = (src.height() - 1) * 0.5;

  auto too_close = [](double coord, double reach) {
    const double dist = std::abs(coord - std::round(coord));
    return dist <= reach * 1.05 + 1e-12;
  };

  for (int v = 0; v < src.height(); ++v) {
    for (int u = 0; u < src.width(); ++u) {
      const double du = u - cx, dv = v - cy;
      const double sx = ct * du + st * dv + cx - pose.tx;
      const double sy = -st * du + ct * dv + cy;
      // tx probe moves sx by -step; theta probe moves (sx, sy) by the
      // rotational velocities
      if (too_close(sx, step_tx)) return false;
      const double vx = std::abs(sy - cy) * step_theta;
      const double vy = std::abs(sx - cx + pose.tx) * step_theta;
      if (too_close(sx, vx) || too_close(sy, vy)) return false;
    }
  }
  return true;
}

GradReport compare(std::span<const double> analytic, std::span<const double> numeric,
                   double abs_tol, double rel_tol,
                   std::span<const std::uint8_t> kink_mask) {
  if (analytic.size() != numeric.size())
    throw std::invalid_argument("compare: length mismatch");
  if (!kink_mask.empty() && kink_mask.size() != analytic.size())
    throw std::invalid_argument("compare: mask length mismatch");

  GradReport report;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (!kink_mask.empty() && kink_mask[i]) {
      ++report.num_skipped_kinks;
      continue;
    }
    ++report.num_checked;
    const double a = analytic[i];
    const double n = numeric[i];
    const double abs_err = std::abs(a - n);
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (abs_err <= abs_tol) continue;
    const double denom = std::max(std::abs(a), std::abs(n));
    const double rel_err = denom > 0.0 ? abs_err / denom : 0.0;
    if (rel_err > report.max_rel_error) {
      report.max_rel_error = rel_err;
      report.worst_coordinate = static_cast<std::ptrdiff_t>(i);
    }
    if (rel_err > rel_tol) ++report.num_failed;
  }
  return report;
}

}  // namespace fuzzymi
