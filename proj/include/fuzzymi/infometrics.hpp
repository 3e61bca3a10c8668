// infometrics.hpp - entropy, mutual information, the linearized
// mutual-information (LMI) loss with analytic gradients, and the baseline
// similarity losses (L1, L2, windowed SSIM) over Grids.

#pragma once

#include <optional>
#include <vector>

#include "fuzzymi/grid.hpp"
#include "fuzzymi/softhist.hpp"

namespace fuzzymi {

struct LossReport {
  double value = 0.0;
  // Grid-shaped, per prediction pixel; absent when gradients not requested.
  std::optional<std::vector<double>> grad_wrt_prediction;
};

// -sum p log p, natural log, 0 log 0 = 0. Input must be normalized.
double entropy(const Histogram1D& pdf);
double entropy(const JointHistogram& pdf);

// H(X) + H(Y) - H(X,Y). Marginals must be consistent with the joint to 1e-6;
// tiny negative results from rounding are clamped to 0.
double mutual_information(const Histogram1D& px, const Histogram1D& py,
                          const JointHistogram& pxy);

// (1/3) * ( off-diagonal mass + sum_i |p_ii - pX_i| + sum_i |p_ii - pY_i| ),
// marginals derived from the joint. Zero iff the joint is diagonal with
// diagonal equal to both marginals; bounded by 1.
double lmi(const JointHistogram& pxy);

// dLMI/dp, with the marginals treated as constants (detached): 1/3 off the
// diagonal, (1/3)(sign(p_ii - pX_i) + sign(p_ii - pY_i)) on it, sign(0) = 0.
// grad_through_marginals additionally routes the marginals' dependence on
// the joint (ablation only; default off).
std::vector<double> lmi_grad_joint(const JointHistogram& pxy,
                                   bool grad_through_marginals = false);

// Full pipeline on an image pair: soft joint histogram over paired pixels
// (X = target, Y = prediction), LMI value, and the per-pixel gradient
// w.r.t. the prediction. No gradient flows to the target.
LossReport lmi_pair(const Grid& target, const Grid& prediction, int bins,
                    bool with_grad = true, bool grad_through_marginals = false);

// Mutual-information objective for maximization-based alignment: value is
// -MI(target, prediction); the gradient routes through the joint pdf only.
LossReport mi_pair(const Grid& target, const Grid& prediction, int bins,
                   bool with_grad = true);

// mean |d| and mean d^2 with d = prediction - target.
LossReport l1_pair(const Grid& target, const Grid& prediction, bool with_grad = true);
LossReport l2_pair(const Grid& target, const Grid& prediction, bool with_grad = true);

// Windowed SSIM with 3x3 box statistics, C1 = (0.01*255)^2, C2 = (0.03*255)^2.
// Loss = mean over pixels with a full window of (1 - SSIM)/2. Border pixels
// are excluded from the mean and carry no gradient of their own windows.
LossReport ssim_pair(const Grid& target, const Grid& prediction, bool with_grad = true);

}  // namespace fuzzymi
