#include "fuzzymi/softhist.hpp"

#include <algorithm>
#include <cmath>

#include "fuzzymi/kernels.hpp"

namespace fuzzymi {

namespace {

void check_range(double range_min, double range_max) {
  if (!(range_min < range_max))
    throw std::invalid_argument("softhist: degenerate range");
}

void check_bins(int bins) {
  if (bins < 2) throw std::invalid_argument("softhist: need at least 2 bins");
}

void check_in_range(std::span<const double> samples, double range_min,
                    double range_max) {
  if (samples.empty()) throw std::invalid_argument("softhist: empty input");
  double lo, hi;
  kernels::minmax(samples, lo, hi);
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("softhist: non-finite sample");
  if (lo < range_min || hi > range_max)
    throw std::invalid_argument("softhist: sample outside range");
}

}  // namespace

BinAssignment bin_coordinates(double x, double range_min, double range_max, int bins) {
  check_bins(bins);
  check_range(range_min, range_max);
  if (!std::isfinite(x) || x < range_min || x > range_max)
    throw std::invalid_argument("bin_coordinates: x outside range");
  double xb = bins * (x - range_min) / (range_max - range_min);
  xb = std::min(std::max(xb, 0.0), static_cast<double>(bins - 1));
  const double b = std::floor(xb);
  BinAssignment a;
  a.xb = xb;
  a.x0 = static_cast<int>(b);
  a.x1 = std::min(a.x0 + 1, bins - 1);
  a.m1 = xb - b;
  a.m0 = 1.0 - a.m1;
  return a;
}

double Histogram1D::total() const { return kernels::reduce_sum(counts); }
double JointHistogram::total() const { return kernels::reduce_sum(counts); }

Histogram1D soft_hist_1d(std::span<const double> samples, int bins,
                         double range_min, double range_max) {
  check_bins(bins);
  check_range(range_min, range_max);
  check_in_range(samples, range_min, range_max);

  std::vector<std::int32_t> bin0(samples.size());
  std::vector<double> frac(samples.size());
  kernels::bin_split(samples, range_min, bins / (range_max - range_min), bins,
                     bin0, frac);
  Histogram1D hist;
  hist.counts.assign(static_cast<std::size_t>(bins), 0.0);
  kernels::hist_accumulate(bin0, frac, bins, hist.counts);
  return hist;
}

JointHistogram soft_hist_2d(std::span<const double> xs, std::span<const double> ys,
                            int bins, double range_min, double range_max) {
  check_bins(bins);
  check_range(range_min, range_max);
  if (xs.size() != ys.size())
    throw std::invalid_argument("soft_hist_2d: length mismatch");
  check_in_range(xs, range_min, range_max);
  check_in_range(ys, range_min, range_max);

  const double inv = bins / (range_max - range_min);
  std::vector<std::int32_t> xb0(xs.size()), yb0(ys.size());
  std::vector<double> xf(xs.size()), yf(ys.size());
  kernels::bin_split(xs, range_min, inv, bins, xb0, xf);
  kernels::bin_split(ys, range_min, inv, bins, yb0, yf);

  JointHistogram joint;
  joint.bins = bins;
  joint.counts.assign(static_cast<std::size_t>(bins) * bins, 0.0);
  kernels::joint_accumulate(xb0, xf, yb0, yf, bins, joint.counts);
  return joint;
}

namespace {

std::vector<double> normalized_counts(const std::vector<double>& counts) {
  const double total = kernels::reduce_sum(counts);
  if (!(total > 0.0))
    throw EmptyHistogramError("normalize: histogram has zero total mass");
  std::vector<double> out(counts.size());
  const double inv = 1.0 / total;
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = counts[i] * inv;
  return out;
}

}  // namespace

Histogram1D normalize(const Histogram1D& hist) {
  if (hist.normalized) return hist;
  return Histogram1D{normalized_counts(hist.counts), true};
}

JointHistogram normalize(const JointHistogram& hist) {
  if (hist.normalized) return hist;
  return JointHistogram{hist.bins, normalized_counts(hist.counts), true};
}

std::pair<Histogram1D, Histogram1D> marginals_from_joint(const JointHistogram& joint) {
  if (!joint.normalized)
    throw std::invalid_argument("marginals_from_joint: joint must be normalized");
  const int n = joint.bins;
  Histogram1D px, py;
  px.counts.assign(static_cast<std::size_t>(n), 0.0);
  py.counts.assign(static_cast<std::size_t>(n), 0.0);
  px.normalized = py.normalized = true;
  for (int i = 0; i < n; ++i) {
    const double* row = joint.counts.data() + static_cast<std::size_t>(i) * n;
    double rs = 0.0;
    for (int j = 0; j < n; ++j) {
      rs += row[j];
      py.counts[j] += row[j];
    }
    px.counts[i] = rs;
  }
  return {std::move(px), std::move(py)};
}

SampleGradients backward_samples(std::span<const double> dl_djoint, int bins,
                                 std::span<const double> xs,
                                 std::span<const double> ys,
                                 double range_min, double range_max,
                                 double total_mass, bool with_dx) {
  check_bins(bins);
  check_range(range_min, range_max);
  if (dl_djoint.size() != static_cast<std::size_t>(bins) * bins)
    throw std::invalid_argument("backward_samples: gradient shape mismatch");
  if (xs.size() != ys.size())
    throw std::invalid_argument("backward_samples: length mismatch");
  if (!(total_mass > 0.0))
    throw std::invalid_argument("backward_samples: zero total mass");
  check_in_range(xs, range_min, range_max);
  check_in_range(ys, range_min, range_max);

  const double inv = bins / (range_max - range_min);
  std::vector<std::int32_t> xb0(xs.size()), yb0(ys.size());
  std::vector<double> xf(xs.size()), yf(ys.size());
  kernels::bin_split(xs, range_min, inv, bins, xb0, xf);
  kernels::bin_split(ys, range_min, inv, bins, yb0, yf);

  const double coeff = inv / total_mass;  // d(xb)/dx folded with 1/mass
  SampleGradients grads;
  grads.d_ys.resize(ys.size());
  kernels::soft_joint_backward(dl_djoint, bins, xb0, xf, yb0, yf, coeff, grads.d_ys);

  if (with_dx) {
    // The x side is the y-side formula on the transposed gradient matrix.
    std::vector<double> transposed(dl_djoint.size());
    for (int i = 0; i < bins; ++i)
      for (int j = 0; j < bins; ++j)
        transposed[static_cast<std::size_t>(j) * bins + i] =
            dl_djoint[static_cast<std::size_t>(i) * bins + j];
    grads.d_xs.emplace(xs.size());
    kernels::soft_joint_backward(transposed, bins, yb0, yf, xb0, xf, coeff,
                                 *grads.d_xs);
  }
  return grads;
}

}  // namespace fuzzymi
