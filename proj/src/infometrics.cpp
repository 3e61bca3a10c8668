#include "fuzzymi/infometrics.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "fuzzymi/kernels.hpp"

namespace fuzzymi {

namespace {

double entropy_impl(std::span<const double> p, bool normalized) {
  if (!normalized) throw std::invalid_argument("entropy: input must be normalized");
  double s = 0.0, c = 0.0;
  for (double v : p) {
    if (v < 0.0) throw std::invalid_argument("entropy: negative probability");
    if (v <= 0.0) continue;  // 0 log 0 = 0
    const double x = -v * std::log(v);
    const double y = x - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_pair(const Grid& target, const Grid& prediction) {
  if (!target.same_shape(prediction))
    throw std::invalid_argument("loss: image shapes differ");
}

}  // namespace

double entropy(const Histogram1D& pdf) { return entropy_impl(pdf.counts, pdf.normalized); }
double entropy(const JointHistogram& pdf) { return entropy_impl(pdf.counts, pdf.normalized); }

double mutual_information(const Histogram1D& px, const Histogram1D& py,
                          const JointHistogram& pxy) {
  if (!px.normalized || !py.normalized || !pxy.normalized)
    throw std::invalid_argument("mutual_information: inputs must be normalized");
  const int n = pxy.bins;
  if (px.bins() != n || py.bins() != n)
    throw std::invalid_argument("mutual_information: bin counts differ");
  const auto [jx, jy] = marginals_from_joint(pxy);
  for (int i = 0; i < n; ++i) {
    if (std::abs(jx.counts[i] - px.counts[i]) > 1e-6 ||
        std::abs(jy.counts[i] - py.counts[i]) > 1e-6)
      throw std::invalid_argument("mutual_information: marginals inconsistent with joint");
  }
  double mi = entropy(px) + entropy(py) - entropy(pxy);
  if (mi < 0.0 && mi > -1e-9) mi = 0.0;
  return mi;
}

double lmi(const JointHistogram& pxy) {
  if (!pxy.normalized) throw std::invalid_argument("lmi: joint must be normalized");
  const int n = pxy.bins;
  const auto [px, py] = marginals_from_joint(pxy);

  double diag_mass = 0.0;
  double off = 0.0, abs_x = 0.0, abs_y = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pii = pxy.at(i, i);
    diag_mass += pii;
    abs_x += std::abs(pii - px.counts[i]);
    abs_y += std::abs(pii - py.counts[i]);
    const double* row = pxy.counts.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j)
      if (j != i) off += row[j];
  }
  if (diag_mass > 1.0 + 1e-12)
    throw std::logic_error("lmi: diagonal mass exceeds 1");
  return (off + abs_x + abs_y) / 3.0;
}

std::vector<double> lmi_grad_joint(const JointHistogram& pxy,
                                   bool grad_through_marginals) {
  if (!pxy.normalized)
    throw std::invalid_argument("lmi_grad_joint: joint must be normalized");
  const int n = pxy.bins;
  const auto [px, py] = marginals_from_joint(pxy);

  std::vector<double> sx(n), sy(n);
  for (int i = 0; i < n; ++i) {
    sx[i] = sign_of(pxy.at(i, i) - px.counts[i]);
    sy[i] = sign_of(pxy.at(i, i) - py.counts[i]);
  }

  std::vector<double> grad(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      double g;
      if (!grad_through_marginals) {
        g = a == b ? sx[a] + sy[a] : 1.0;
      } else {
        // pX_a and pY_b are sums over row a / column b of the joint, so each
        // |.| term contributes sign * (delta_ab - 1).
        g = (a == b ? 0.0 : 1.0) + sx[a] * ((a == b ? 1.0 : 0.0) - 1.0) +
            sy[b] * ((a == b ? 1.0 : 0.0) - 1.0);
      }
      grad[static_cast<std::size_t>(a) * n + b] = g / 3.0;
    }
  }
  return grad;
}

LossReport lmi_pair(const Grid& target, const Grid& prediction, int bins,
                    bool with_grad, bool grad_through_marginals) {
  check_pair(target, prediction);
  if (!target.same_range(prediction))
    throw std::invalid_argument("lmi_pair: image ranges differ");
  const auto xs = target.samples();
  const auto ys = prediction.samples();
  const JointHistogram joint = soft_hist_2d(xs, ys, bins, target.range_min(),
                                            target.range_max());
  const JointHistogram p = normalize(joint);
  LossReport report;
  report.value = lmi(p);
  if (with_grad) {
    const std::vector<double> gj = lmi_grad_joint(p, grad_through_marginals);
    report.grad_wrt_prediction =
        backward_samples(gj, bins, xs, ys, target.range_min(), target.range_max(),
                         static_cast<double>(xs.size()))
            .d_ys;
  }
  return report;
}

LossReport mi_pair(const Grid& target, const Grid& prediction, int bins,
                   bool with_grad) {
  check_pair(target, prediction);
  if (!target.same_range(prediction))
    throw std::invalid_argument("mi_pair: image ranges differ");
  const auto xs = target.samples();
  const auto ys = prediction.samples();
  const JointHistogram p =
      normalize(soft_hist_2d(xs, ys, bins, target.range_min(), target.range_max()));
  const auto [px, py] = marginals_from_joint(p);

  LossReport report;
  report.value = -mutual_information(px, py, p);
  if (with_grad) {
    // Marginals detached: d(-MI)/dp_ij = -(log p_ij + 1), 0 on empty cells.
    std::vector<double> gj(p.counts.size(), 0.0);
    for (std::size_t i = 0; i < p.counts.size(); ++i)
      if (p.counts[i] > 0.0) gj[i] = -(std::log(p.counts[i]) + 1.0);
    report.grad_wrt_prediction =
        backward_samples(gj, bins, xs, ys, target.range_min(), target.range_max(),
                         static_cast<double>(xs.size()))
            .d_ys;
  }
  return report;
}

LossReport l1_pair(const Grid& target, const Grid& prediction, bool with_grad) {
  check_pair(target, prediction);
  const auto t = target.samples();
  const auto p = prediction.samples();
  const double m = static_cast<double>(p.size());
  LossReport report;
  report.value = kernels::reduce_abs_diff(p, t) / m;
  if (with_grad) {
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = sign_of(p[i] - t[i]) / m;
    report.grad_wrt_prediction = std::move(g);
  }
  return report;
}

LossReport l2_pair(const Grid& target, const Grid& prediction, bool with_grad) {
  check_pair(target, prediction);
  const auto t = target.samples();
  const auto p = prediction.samples();
  const double m = static_cast<double>(p.size());
  LossReport report;
  report.value = kernels::reduce_sq_diff(p, t) / m;
  if (with_grad) {
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = 2.0 * (p[i] - t[i]) / m;
    report.grad_wrt_prediction = std::move(g);
  }
  return report;
}

namespace {

// 3x3 box sums at every full-window centre, one output row per image row.
void box3_sums(std::span<const double> img, int w, int h, std::vector<double>& out) {
  out.assign(img.size(), 0.0);
  std::vector<double> rowsum(img.size());  // horizontal 3-sums
  for (int y = 0; y < h; ++y) {
    const double* row = img.data() + static_cast<std::size_t>(y) * w;
    double* dst = rowsum.data() + static_cast<std::size_t>(y) * w;
    for (int x = 1; x + 1 < w; ++x) dst[x] = row[x - 1] + row[x] + row[x + 1];
  }
  for (int y = 1; y + 1 < h; ++y) {
    const double* r0 = rowsum.data() + static_cast<std::size_t>(y - 1) * w;
    const double* r1 = rowsum.data() + static_cast<std::size_t>(y) * w;
    const double* r2 = rowsum.data() + static_cast<std::size_t>(y + 1) * w;
    double* dst = out.data() + static_cast<std::size_t>(y) * w;
    for (int x = 1; x + 1 < w; ++x) dst[x] = r0[x] + r1[x] + r2[x];
  }
}

}  // namespace

LossReport ssim_pair(const Grid& target, const Grid& prediction, bool with_grad) {
  check_pair(target, prediction);
  if (target.range_min() != 0.0 || target.range_max() != 255.0 ||
      !target.same_range(prediction))
    throw std::invalid_argument("ssim_pair: range must be [0,255]");
  const int w = target.width();
  const int h = target.height();
  if (w < 3 || h < 3)
    throw std::invalid_argument("ssim_pair: image smaller than 3x3 window");

  constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
  constexpr double kN = 9.0;

  const auto x = target.samples();
  const auto y = prediction.samples();
  std::vector<double> xy(x.size()), xx(x.size()), yy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy[i] = x[i] * y[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
  }
  std::vector<double> sx, sy, sxy, sxx, syy;
  box3_sums(x, w, h, sx);
  box3_sums(y, w, h, sy);
  box3_sums(xy, w, h, sxy);
  box3_sums(xx, w, h, sxx);
  box3_sums(yy, w, h, syy);

  const double valid = static_cast<double>(w - 2) * (h - 2);
  std::vector<double> grad;
  if (with_grad) grad.assign(x.size(), 0.0);

  double acc = 0.0, comp = 0.0;
  for (int v = 1; v + 1 < h; ++v) {
    for (int u = 1; u + 1 < w; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * w + u;
      const double mx = sx[i] / kN;
      const double my = sy[i] / kN;
      const double vxy = sxy[i] / kN - mx * my;
      const double vxx = sxx[i] / kN - mx * mx;
      const double vyy = syy[i] / kN - my * my;
      const double a1 = 2.0 * mx * my + kC1;
      const double a2 = 2.0 * vxy + kC2;
      const double b1 = mx * mx + my * my + kC1;
      const double b2 = vxx + vyy + kC2;
      const double s = (a1 * a2) / (b1 * b2);

      const double term = (1.0 - s) * 0.5;
      const double yk = term - comp;
      const double tk = acc + yk;
      comp = (tk - acc) - yk;
      acc = tk;

      if (with_grad) {
        // dS/d(mu_y), dS/d(sigma_xy), dS/d(sigma_yy)
        const double ds_dmy = 2.0 * (mx * a2 / (b1 * b2) - my * s / b1);
        const double ds_dvxy = 2.0 * a1 / (b1 * b2);
        const double ds_dvyy = -s / b2;
        const double scale = -0.5 / valid / kN;
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            const std::size_t k = static_cast<std::size_t>(v + dv) * w + (u + du);
            grad[k] += scale * (ds_dmy + ds_dvxy * (x[k] - mx) +
                                ds_dvyy * 2.0 * (y[k] - my));
          }
        }
      }
    }
  }

  LossReport report;
  report.value = acc / valid;
  if (with_grad) report.grad_wrt_prediction = std::move(grad);
  return report;
}

}  // namespace fuzzymi
