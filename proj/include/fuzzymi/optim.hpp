// optim.hpp - first-order optimizers (GD, Adam), the multistart alignment
// driver minimizing a similarity loss over a 2-DoF pose, and an exhaustive
// grid-search oracle over the pose space.

#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "fuzzymi/grid.hpp"
#include "fuzzymi/infometrics.hpp"
#include "fuzzymi/warp.hpp"

namespace fuzzymi {

enum class LossKind { l1, l2, ssim, lmi, mi };
enum class Algorithm { gd, adam };

LossKind loss_kind_from_name(const std::string& name);
std::string loss_kind_name(LossKind kind);

struct OptimConfig {
  Algorithm algorithm = Algorithm::adam;
  double learning_rate = 1.0;  // pose units are pixels / degrees
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  int max_iters = 150;
  LossKind loss = LossKind::lmi;
  int bins = 11;
  std::vector<Pose2> multistart;  // empty = default 5x5 grid
  // Triage: fully optimize only the multistart_keep starts with the lowest
  // initial loss (0 = all). A dropped start keeps its initial loss as its
  // final loss, so it can never beat a kept one.
  int multistart_keep = 0;
  // Converged when |loss change| < convergence_tol for 10 consecutive iters.
  double convergence_tol = 1e-7;
  int num_threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

// tx in {-80,-40,0,40,80} x theta in {-30,-15,0,15,30}; covers the bar
// dataset's generation range with basin-sized spacing.
std::vector<Pose2> default_multistart();

struct IterationRecord {
  int iteration = 0;
  Pose2 pose;
  double loss = 0.0;
  double grad_tx = 0.0;
  double grad_theta = 0.0;
};

struct StartSummary {
  int start_index = 0;
  Pose2 initial_pose;
  Pose2 final_pose;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool converged = false;
  bool diverged = false;  // non-finite loss; start abandoned
  int iterations = 0;
};

struct AlignmentTrace {
  std::vector<IterationRecord> records;  // winning start only
  std::vector<StartSummary> starts;      // all starts, in start order
  Pose2 final_pose;
  double final_loss = 0.0;
  bool converged = false;
  int winning_start = -1;

  std::string trace_csv() const;  // iter,tx,theta,loss,grad_tx,grad_theta
};

// Plain step: params -= lr * grad.
void gd_step(std::vector<double>& params, std::span<const double> grad,
             const OptimConfig& config);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step_count = 0;
};

// Standard Adam with bias correction.
void adam_step(std::vector<double>& params, AdamState& state,
               std::span<const double> grad, const OptimConfig& config);

// Minimizes config.loss over (tx, theta) for warp(source) -> target from
// every multistart pose; returns the best pose seen across all starts.
// Starts run independently (optionally in parallel); the merge is
// deterministic: lowest final loss, ties by start index.
std::pair<Pose2, AlignmentTrace> align(const Grid& source, const Grid& target,
                                       const OptimConfig& config);

struct GridRange {
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;

  std::vector<double> values() const;
};

struct GridSearchResult {
  Pose2 best;
  double best_loss = 0.0;
  std::vector<double> tx_values;
  std::vector<double> theta_values;
  std::vector<double> surface;  // rows = tx values, cols = theta values
};

// Exhaustive loss evaluation over the Cartesian pose grid. Ties broken by
// smallest |tx|, then smallest |theta|.
GridSearchResult grid_search_oracle(const Grid& source, const Grid& target,
                                    LossKind loss, const GridRange& tx_range,
                                    const GridRange& theta_range, int bins);

// Shared loss dispatch. For LossKind::mi the value is -MI (maximization).
LossReport evaluate_loss(LossKind kind, const Grid& target, const Grid& prediction,
                         int bins, bool with_grad);

}  // namespace fuzzymi
