// warp.hpp - differentiable 2-DoF rigid transform (horizontal translation +
// in-plane rotation about the image centre) with bilinear sampling.

#pragma once

#include <span>

#include "fuzzymi/grid.hpp"

namespace fuzzymi {

// tx in pixels (positive = rightward), theta in degrees (positive =
// counter-clockwise in x-right/y-down coordinates). |tx| <= image width and
// |theta| < 180 are enforced by the warp operations.
struct Pose2 {
  double tx = 0.0;
  double theta_deg = 0.0;
};

// Inverse warping: each output pixel samples the source at the point
// obtained by rotating (u, v) about the image centre ((w-1)/2, (h-1)/2) by
// -theta and then translating by -tx, via bilinear interpolation;
// out-of-bounds samples read as 0.
Grid warp_rigid(const Grid& src, const Pose2& pose);

struct PoseGradient {
  double d_tx = 0.0;
  double d_theta_deg = 0.0;
};

// Chain rule from a loss gradient over the warped output to the pose.
PoseGradient warp_backward(const Grid& src, const Pose2& pose,
                           std::span<const double> dl_dout);

}  // namespace fuzzymi
