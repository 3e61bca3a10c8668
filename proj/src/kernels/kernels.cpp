#include "fuzzymi/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstring>

namespace fuzzymi::kernels {

namespace {

std::atomic<int> g_forced{-1};  // -1 = automatic

Isa detect() {
  if (const char* env = std::getenv("FUZZYMI_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_available()) return Isa::avx2;
    if (std::strcmp(env, "avx2") == 0) return Isa::scalar;  // not supported here
  }
  return avx2_available() ? Isa::avx2 : Isa::scalar;
}

}  // namespace

bool avx2_available() {
#if defined(FUZZYMI_HAVE_AVX2) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() {
  const int forced = g_forced.load(std::memory_order_relaxed);
  if (forced >= 0) return static_cast<Isa>(forced);
  static const Isa detected = detect();
  return detected;
}

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && !avx2_available()) isa = Isa::scalar;
  g_forced.store(static_cast<int>(isa), std::memory_order_relaxed);
}

void reset_isa() { g_forced.store(-1, std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

#if defined(FUZZYMI_HAVE_AVX2)
#define FUZZYMI_DISPATCH(call) \
  return active_isa() == Isa::avx2 ? avx2::call : scalar::call
#define FUZZYMI_DISPATCH_VOID(call)    \
  if (active_isa() == Isa::avx2) {     \
    avx2::call;                        \
  } else {                             \
    scalar::call;                      \
  }                                    \
  return
#else
#define FUZZYMI_DISPATCH(call) return scalar::call
#define FUZZYMI_DISPATCH_VOID(call) \
  scalar::call;                     \
  return
#endif

double reduce_sum(std::span<const double> v) { FUZZYMI_DISPATCH(reduce_sum(v)); }

double reduce_abs_diff(std::span<const double> a, std::span<const double> b) {
  FUZZYMI_DISPATCH(reduce_abs_diff(a, b));
}

double reduce_sq_diff(std::span<const double> a, std::span<const double> b) {
  FUZZYMI_DISPATCH(reduce_sq_diff(a, b));
}

void minmax(std::span<const double> v, double& lo, double& hi) {
  FUZZYMI_DISPATCH_VOID(minmax(v, lo, hi));
}

void bin_split(std::span<const double> samples, double range_min,
               double inv_bin_width, int bins,
               std::span<std::int32_t> bin0, std::span<double> frac) {
  FUZZYMI_DISPATCH_VOID(bin_split(samples, range_min, inv_bin_width, bins, bin0, frac));
}

void soft_joint_backward(std::span<const double> dl_djoint, int bins,
                         std::span<const std::int32_t> xbin0,
                         std::span<const double> xfrac,
                         std::span<const std::int32_t> ybin0,
                         std::span<const double> yfrac,
                         double coeff, std::span<double> dl_dy) {
  FUZZYMI_DISPATCH_VOID(soft_joint_backward(dl_djoint, bins, xbin0, xfrac,
                                            ybin0, yfrac, coeff, dl_dy));
}

void warp_bilinear(const double* src, int width, int height,
                   const RigidMap& map, double* out) {
  FUZZYMI_DISPATCH_VOID(warp_bilinear(src, width, height, map, out));
}

void warp_pose_backward(const double* src, int width, int height,
                        const RigidMap& map, const double* dl_dout,
                        double& dl_dtx, double& dl_dtheta_rad) {
  FUZZYMI_DISPATCH_VOID(
      warp_pose_backward(src, width, height, map, dl_dout, dl_dtx, dl_dtheta_rad));
}

// Scatter accumulation: order-dependent float adds, so a single fixed
// (sample-order) scalar loop is the one true implementation.
void hist_accumulate(std::span<const std::int32_t> bin0,
                     std::span<const double> frac,
                     int bins, std::span<double> counts) {
  const int top = bins - 1;
  for (std::size_t k = 0; k < bin0.size(); ++k) {
    const int b0 = bin0[k];
    const int b1 = std::min(b0 + 1, top);
    counts[b0] += 1.0 - frac[k];
    counts[b1] += frac[k];
  }
}

void joint_accumulate(std::span<const std::int32_t> xbin0,
                      std::span<const double> xfrac,
                      std::span<const std::int32_t> ybin0,
                      std::span<const double> yfrac,
                      int bins, std::span<double> counts) {
  const int top = bins - 1;
  for (std::size_t k = 0; k < xbin0.size(); ++k) {
    const int x0 = xbin0[k];
    const int y0 = ybin0[k];
    const int x1 = std::min(x0 + 1, top);
    const int y1 = std::min(y0 + 1, top);
    const double mx1 = xfrac[k];
    const double mx0 = 1.0 - mx1;
    const double my1 = yfrac[k];
    const double my0 = 1.0 - my1;
    counts[x0 * bins + y0] += mx0 * my0;
    counts[x0 * bins + y1] += mx0 * my1;
    counts[x1 * bins + y0] += mx1 * my0;
    counts[x1 * bins + y1] += mx1 * my1;
  }
}

}  // namespace fuzzymi::kernels
