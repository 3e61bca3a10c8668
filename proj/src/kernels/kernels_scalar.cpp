// Scalar reference kernels. These define the semantics; the AVX2 variants
// must agree with them (bit-exactly for bin_split, to rounding for the rest).

#include <algorithm>
#include <cmath>

#include "fuzzymi/kernels.hpp"
#include "sum_impl.hpp"

namespace fuzzymi::kernels::scalar {

double reduce_sum(std::span<const double> v) {
  NeumaierSum acc;
  for (double x : v) acc.add(x);
  return acc.total();
}

double reduce_abs_diff(std::span<const double> a, std::span<const double> b) {
  NeumaierSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc.add(std::abs(a[i] - b[i]));
  return acc.total();
}

double reduce_sq_diff(std::span<const double> a, std::span<const double> b) {
  NeumaierSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc.add(d * d);
  }
  return acc.total();
}

void minmax(std::span<const double> v, double& lo, double& hi) {
  double a = v.empty() ? 0.0 : v[0];
  double b = a;
  for (double x : v) {
    a = std::min(a, x);
    b = std::max(b, x);
  }
  lo = a;
  hi = b;
}

void bin_split(std::span<const double> samples, double range_min,
               double inv_bin_width, int bins,
               std::span<std::int32_t> bin0, std::span<double> frac) {
  const double top = static_cast<double>(bins - 1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double xb = (samples[i] - range_min) * inv_bin_width;
    xb = std::min(std::max(xb, 0.0), top);
    const double b = std::floor(xb);
    bin0[i] = static_cast<std::int32_t>(b);
    frac[i] = xb - b;
  }
}

void soft_joint_backward(std::span<const double> dl_djoint, int bins,
                         std::span<const std::int32_t> xbin0,
                         std::span<const double> xfrac,
                         std::span<const std::int32_t> ybin0,
                         std::span<const double> yfrac,
                         double coeff, std::span<double> dl_dy) {
  const double* P = dl_djoint.data();
  const int top = bins - 1;
  (void)yfrac;  // membership derivatives are the constants -1/+1
  for (std::size_t k = 0; k < xbin0.size(); ++k) {
    const int x0 = xbin0[k];
    const int y0 = ybin0[k];
    const int x1 = std::min(x0 + 1, top);
    const int y1 = std::min(y0 + 1, top);
    const double fx = xfrac[k];
    const double row0 = P[x0 * bins + y1] - P[x0 * bins + y0];
    const double row1 = P[x1 * bins + y1] - P[x1 * bins + y0];
    dl_dy[k] = coeff * ((1.0 - fx) * row0 + fx * row1);
  }
}

namespace {

inline double sample_bilinear(const double* src, int w, int h, double sx,
                              double sy, double* gx = nullptr,
                              double* gy = nullptr) {
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double ax = sx - fx0;
  const double ay = sy - fy0;

  auto at = [&](int x, int y) -> double {
    if (x < 0 || x >= w || y < 0 || y >= h) return 0.0;
    return src[y * w + x];
  };
  const double v00 = at(x0, y0);
  const double v10 = at(x0 + 1, y0);
  const double v01 = at(x0, y0 + 1);
  const double v11 = at(x0 + 1, y0 + 1);

  if (gx) *gx = (v10 - v00) * (1.0 - ay) + (v11 - v01) * ay;
  if (gy) *gy = (v01 - v00) * (1.0 - ax) + (v11 - v10) * ax;
  return v00 * (1.0 - ax) * (1.0 - ay) + v10 * ax * (1.0 - ay) +
         v01 * (1.0 - ax) * ay + v11 * ax * ay;
}

}  // namespace

void warp_bilinear(const double* src, int width, int height,
                   const RigidMap& m, double* out) {
  for (int v = 0; v < height; ++v) {
    const double dy = v - m.cy;
    const double bx = m.sin_t * dy + m.cx - m.tx;
    const double by = m.cos_t * dy + m.cy;
    for (int u = 0; u < width; ++u) {
      const double du = u - m.cx;
      const double sx = m.cos_t * du + bx;
      const double sy = -m.sin_t * du + by;
      out[v * width + u] = sample_bilinear(src, width, height, sx, sy);
    }
  }
}

void warp_pose_backward(const double* src, int width, int height,
                        const RigidMap& m, const double* dl_dout,
                        double& dl_dtx, double& dl_dtheta_rad) {
  NeumaierSum acc_tx, acc_th;
  for (int v = 0; v < height; ++v) {
    const double dy = v - m.cy;
    const double bx = m.sin_t * dy + m.cx - m.tx;
    const double by = m.cos_t * dy + m.cy;
    for (int u = 0; u < width; ++u) {
      const double g = dl_dout[v * width + u];
      const double du = u - m.cx;
      const double sx = m.cos_t * du + bx;
      const double sy = -m.sin_t * du + by;
      double gx = 0.0, gy = 0.0;
      sample_bilinear(src, width, height, sx, sy, &gx, &gy);
      // dsx/dtx = -1; dsx/dtheta = sy - cy; dsy/dtheta = -(sx - cx + tx)
      acc_tx.add(-g * gx);
      acc_th.add(g * (gx * (sy - m.cy) - gy * (sx - m.cx + m.tx)));
    }
  }
  dl_dtx = acc_tx.total();
  dl_dtheta_rad = acc_th.total();
}

}  // namespace fuzzymi::kernels::scalar
