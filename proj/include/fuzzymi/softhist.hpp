// softhist.hpp - fuzzy (differentiable) 1-D and 2-D histograms.
//
// Each observation is split between its two neighbouring bins with
// memberships m0 = 1 - frac and m1 = frac of the continuous bin coordinate,
// so histogram mass is differentiable in the observations. The backward pass
// maps a gradient in joint-pdf space to per-sample gradients.

#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fuzzymi {

class EmptyHistogramError : public std::runtime_error {
 public:
  explicit EmptyHistogramError(const std::string& what) : std::runtime_error(what) {}
};

// One observation's continuous bin coordinate and two-bin fuzzy assignment.
// Invariants: 0 <= x0 <= x1 <= bins-1, x1 - x0 <= 1, m0 + m1 = 1, m0/m1 >= 0.
struct BinAssignment {
  double xb;  // clamped to [0, bins-1]
  int x0;
  int x1;
  double m0;
  double m1;
};

// xb = bins * (x - range_min) / (range_max - range_min), clamped to
// [0, bins-1] so the x == range_max observation lands fully in the top bin.
BinAssignment bin_coordinates(double x, double range_min, double range_max, int bins);

struct Histogram1D {
  std::vector<double> counts;
  bool normalized = false;

  int bins() const { return static_cast<int>(counts.size()); }
  double total() const;
};

// Row index = X bin, column index = Y bin, row-major storage.
struct JointHistogram {
  int bins = 0;
  std::vector<double> counts;
  bool normalized = false;

  double at(int i, int j) const { return counts[static_cast<std::size_t>(i) * bins + j]; }
  double& at(int i, int j) { return counts[static_cast<std::size_t>(i) * bins + j]; }
  double total() const;
};

// Unnormalized accumulation; total mass equals the sample count.
Histogram1D soft_hist_1d(std::span<const double> samples, int bins,
                         double range_min, double range_max);
JointHistogram soft_hist_2d(std::span<const double> xs, std::span<const double> ys,
                            int bins, double range_min, double range_max);

// Divides by total mass; idempotent on normalized input.
Histogram1D normalize(const Histogram1D& hist);
JointHistogram normalize(const JointHistogram& hist);

// Row sums and column sums of a normalized joint.
std::pair<Histogram1D, Histogram1D> marginals_from_joint(const JointHistogram& joint);

struct SampleGradients {
  std::vector<double> d_ys;
  std::optional<std::vector<double>> d_xs;  // only when requested
};

// Chain rule from dL/d(joint pdf) to per-sample gradients:
//   dL/dy = sum_{i,j in {0,1}} dL/dp[x_i][y_j] * (1/total_mass)
//           * m_{x_i} * (dm_{y_j}/dy_b) * (bins / range span)
// with dm_{y0}/dy_b = -1 and dm_{y1}/dy_b = +1. Normalization backward is
// division by the constant total mass (memberships sum to 1 per sample).
// Gradients w.r.t. xs are off by default; only the prediction side of a
// pair receives gradients.
SampleGradients backward_samples(std::span<const double> dl_djoint, int bins,
                                 std::span<const double> xs,
                                 std::span<const double> ys,
                                 double range_min, double range_max,
                                 double total_mass, bool with_dx = false);

}  // namespace fuzzymi
