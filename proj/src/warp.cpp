#include "fuzzymi/warp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fuzzymi/kernels.hpp"

namespace fuzzymi {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

kernels::RigidMap make_map(const Grid& src, const Pose2& pose) {
  if (!std::isfinite(pose.tx) || !std::isfinite(pose.theta_deg))
    throw std::invalid_argument("warp: non-finite pose");
  if (std::abs(pose.tx) > src.width())
    throw std::invalid_argument("warp: |tx| exceeds image width");
  if (!(std::abs(pose.theta_deg) < 180.0))
    throw std::invalid_argument("warp: |theta| must be below 180 degrees");
  const double theta = pose.theta_deg * kDegToRad;
  kernels::RigidMap m;
  m.cos_t = std::cos(theta);
  m.sin_t = std::sin(theta);
  m.tx = pose.tx;
  m.cx = (src.width() - 1) * 0.5;
  m.cy = (src.height() - 1) * 0.5;
  return m;
}

}  // namespace

Grid warp_rigid(const Grid& src, const Pose2& pose) {
  if (pose.tx == 0.0 && pose.theta_deg == 0.0) {
    // identity is exact by construction
    return src;
  }
  const kernels::RigidMap m = make_map(src, pose);
  std::vector<double> out(src.size());
  kernels::warp_bilinear(src.samples().data(), src.width(), src.height(), m,
                         out.data());
  // Bilinear blending of in-range samples stays in range up to rounding.
  return Grid(src.width(), src.height(), std::move(out), src.range_min(),
              src.range_max(), /*clamp_to_range=*/true);
}

PoseGradient warp_backward(const Grid& src, const Pose2& pose,
                           std::span<const double> dl_dout) {
  if (dl_dout.size() != src.size())
    throw std::invalid_argument("warp_backward: gradient shape mismatch");
  const kernels::RigidMap m = make_map(src, pose);
  double dtx = 0.0, dtheta_rad = 0.0;
  kernels::warp_pose_backward(src.samples().data(), src.width(), src.height(), m,
                              dl_dout.data(), dtx, dtheta_rad);
  return PoseGradient{dtx, dtheta_rad * kDegToRad};
}

}  // namespace fuzzymi
