// kernels.hpp - dispatched inner loops for fuzzymi.
//
// Every kernel has a scalar reference implementation; hot data-parallel ones
// additionally have AVX2 variants selected at runtime. The environment
// variable FUZZYMI_KERNELS=scalar|avx2 overrides the automatic choice.

#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace fuzzymi::kernels {

enum class Isa { scalar, avx2 };

// Active instruction set: force_isa() > FUZZYMI_KERNELS > cpuid.
Isa active_isa();
void force_isa(Isa isa);
void reset_isa();
std::string_view isa_name(Isa isa);
bool avx2_available();

// Compensated (Kahan) reductions. Accumulation order is fixed per ISA, so
// results are deterministic; scalar and AVX2 agree to ~1 ulp of the sum.
double reduce_sum(std::span<const double> v);
double reduce_abs_diff(std::span<const double> a, std::span<const double> b);
double reduce_sq_diff(std::span<const double> a, std::span<const double> b);
void minmax(std::span<const double> v, double& lo, double& hi);

// Fuzzy binning: per sample, the continuous bin coordinate
//   xb = clamp((x - range_min) * inv_bin_width, 0, bins-1)
// is split into bin0 = floor(xb) and frac = xb - bin0. Memberships are
// m0 = 1 - frac on bin0 and m1 = frac on min(bin0+1, bins-1).
// Inputs must already be range-checked. bin_split is branch-free and uses
// the same IEEE operations in both ISAs, so outputs are bit-identical.
void bin_split(std::span<const double> samples, double range_min,
               double inv_bin_width, int bins,
               std::span<std::int32_t> bin0, std::span<double> frac);

// Soft histogram accumulation (scatter; scalar only, order = sample order).
void hist_accumulate(std::span<const std::int32_t> bin0,
                     std::span<const double> frac,
                     int bins, std::span<double> counts);
void joint_accumulate(std::span<const std::int32_t> xbin0,
                      std::span<const double> xfrac,
                      std::span<const std::int32_t> ybin0,
                      std::span<const double> yfrac,
                      int bins, std::span<double> counts);

// Backward through the 2-D soft histogram, y side:
//   dl_dy[k] = coeff * ( (1-fx)*(P[x0][y1] - P[x0][y0])
//                       +    fx*(P[x1][y1] - P[x1][y0]) )
// with x1 = min(x0+1, bins-1), y1 = min(y0+1, bins-1) and P = dl_djoint.
// coeff folds the 1/total_mass normalisation and the bin-coordinate slope.
void soft_joint_backward(std::span<const double> dl_djoint, int bins,
                         std::span<const std::int32_t> xbin0,
                         std::span<const double> xfrac,
                         std::span<const std::int32_t> ybin0,
                         std::span<const double> yfrac,
                         double coeff, std::span<double> dl_dy);

// Rigid inverse map: source = R(-theta) * (p - c) + c - (tx, 0).
struct RigidMap {
  double cos_t = 1.0;  // cos/sin of theta in radians
  double sin_t = 0.0;
  double tx = 0.0;
  double cx = 0.0;  // rotation centre
  double cy = 0.0;
};

// Bilinear sampling of src at the mapped coordinates; out-of-bounds reads 0.
void warp_bilinear(const double* src, int width, int height,
                   const RigidMap& map, double* out);

// Accumulates dL/dtx and dL/dtheta (radians) from a loss gradient w.r.t.
// the warped output, via the bilinear spatial derivatives.
void warp_pose_backward(const double* src, int width, int height,
                        const RigidMap& map, const double* dl_dout,
                        double& dl_dtx, double& dl_dtheta_rad);

// Per-ISA entry points, used directly by the equivalence tests.
namespace scalar {
double reduce_sum(std::span<const double> v);
double reduce_abs_diff(std::span<const double> a, std::span<const double> b);
double reduce_sq_diff(std::span<const double> a, std::span<const double> b);
void minmax(std::span<const double> v, double& lo, double& hi);
void bin_split(std::span<const double> samples, double range_min,
               double inv_bin_width, int bins,
               std::span<std::int32_t> bin0, std::span<double> frac);
void soft_joint_backward(std::span<const double> dl_djoint, int bins,
                         std::span<const std::int32_t> xbin0,
                         std::span<const double> xfrac,
                         std::span<const std::int32_t> ybin0,
                         std::span<const double> yfrac,
                         double coeff, std::span<double> dl_dy);
void warp_bilinear(const double* src, int width, int height,
                   const RigidMap& map, double* out);
void warp_pose_backward(const double* src, int width, int height,
                        const RigidMap& map, const double* dl_dout,
                        double& dl_dtx, double& dl_dtheta_rad);
}  // namespace scalar

#if defined(FUZZYMI_HAVE_AVX2)
namespace avx2 {
double reduce_sum(std::span<const double> v);
double reduce_abs_diff(std::span<const double> a, std::span<const double> b);
double reduce_sq_diff(std::span<const double> a, std::span<const double> b);
void minmax(std::span<const double> v, double& lo, double& hi);
void bin_split(std::span<const double> samples, double range_min,
               double inv_bin_width, int bins,
               std::span<std::int32_t> bin0, std::span<double> frac);
void soft_joint_backward(std::span<const double> dl_djoint, int bins,
                         std::span<const std::int32_t> xbin0,
                         std::span<const double> xfrac,
                         std::span<const std::int32_t> ybin0,
                         std::span<const double> yfrac,
                         double coeff, std::span<double> dl_dy);
void warp_bilinear(const double* src, int width, int height,
                   const RigidMap& map, double* out);
void warp_pose_backward(const double* src, int width, int height,
                        const RigidMap& map, const double* dl_dout,
                        double& dl_dtx, double& dl_dtheta_rad);
}  // namespace avx2
#endif

}  // namespace fuzzymi::kernels
