#include "fuzzymi/optim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace fuzzymi {

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "l1") return LossKind::l1;
  if (name == "l2") return LossKind::l2;
  if (name == "ssim") return LossKind::ssim;
  if (name == "lmi") return LossKind::lmi;
  if (name == "mi") return LossKind::mi;
  throw std::invalid_argument("unknown loss '" + name + "'");
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::l1: return "l1";
    case LossKind::l2: return "l2";
    case LossKind::ssim: return "ssim";
    case LossKind::lmi: return "lmi";
    case LossKind::mi: return "mi";
  }
  return "?";
}

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("optim: learning_rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("optim: betas must lie in [0,1)");
  if (max_iters < 1) throw std::invalid_argument("optim: max_iters must be >= 1");
  if (bins < 2) throw std::invalid_argument("optim: bins must be >= 2");
}

std::vector<Pose2> default_multistart() {
  std::vector<Pose2> starts;
  for (double tx : {-80.0, -40.0, 0.0, 40.0, 80.0})
    for (double theta : {-30.0, -15.0, 0.0, 15.0, 30.0})
      starts.push_back(Pose2{tx, theta});
  return starts;
}

std::string AlignmentTrace::trace_csv() const {
  std::string out = "iter,tx,theta,loss,grad_tx,grad_theta\n";
  char buf[192];
  for (const IterationRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  r.iteration, r.pose.tx, r.pose.theta_deg, r.loss, r.grad_tx,
                  r.grad_theta);
    out += buf;
  }
  return out;
}

void gd_step(std::vector<double>& params, std::span<const double> grad,
             const OptimConfig& config) {
  if (params.size() != grad.size()) throw std::invalid_argument("gd_step: size mismatch");
  for (double g : grad)
    if (!std::isfinite(g)) throw std::invalid_argument("gd_step: non-finite gradient");
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i] -= config.learning_rate * grad[i];
}

void adam_step(std::vector<double>& params, AdamState& state,
               std::span<const double> grad, const OptimConfig& config) {
  if (params.size() != grad.size()) throw std::invalid_argument("adam_step: size mismatch");
  for (double g : grad)
    if (!std::isfinite(g)) throw std::invalid_argument("adam_step: non-finite gradient");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step_count = 0;
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
  }
}

LossReport evaluate_loss(LossKind kind, const Grid& target, const Grid& prediction,
                         int bins, bool with_grad) {
  switch (kind) {
    case LossKind::l1: return l1_pair(target, prediction, with_grad);
    case LossKind::l2: return l2_pair(target, prediction, with_grad);
    case LossKind::ssim: return ssim_pair(target, prediction, with_grad);
    case LossKind::lmi: return lmi_pair(target, prediction, bins, with_grad);
    case LossKind::mi: return mi_pair(target, prediction, bins, with_grad);
  }
  throw std::invalid_argument("evaluate_loss: bad kind");
}

namespace {

struct StartOutcome {
  StartSummary summary;
  std::vector<IterationRecord> records;
};

StartOutcome run_start_impl(const Grid& source, const Grid& target,
                            const OptimConfig& config, const Pose2& start, int index) {
  StartOutcome out;
  out.summary.start_index = index;
  out.summary.initial_pose = start;

  const double max_tx = static_cast<double>(source.width());
  std::vector<double> params = {start.tx, start.theta_deg};
  AdamState adam;
  double best_loss = std::numeric_limits<double>::infinity();
  Pose2 best_pose = start;
  double prev_loss = std::numeric_limits<double>::quiet_NaN();
  int stagnant = 0;

  for (int iter = 0; iter < config.max_iters; ++iter) {
    const Pose2 pose{params[0], params[1]};
    const Grid warped = warp_rigid(source, pose);
    const LossReport rep = evaluate_loss(config.loss, target, warped, config.bins, true);
    if (!std::isfinite(rep.value)) {
      out.summary.diverged = true;
      break;
    }
    const PoseGradient pg = warp_backward(source, pose, *rep.grad_wrt_prediction);
    out.records.push_back({iter, pose, rep.value, pg.d_tx, pg.d_theta_deg});
    ++out.summary.iterations;
    if (iter == 0) out.summary.initial_loss = rep.value;
    if (rep.value < best_loss) {
      best_loss = rep.value;
      best_pose = pose;
    }
    if (std::isfinite(prev_loss) && std::abs(prev_loss - rep.value) < config.convergence_tol) {
      if (++stagnant >= 10) {
        out.summary.converged = true;
        break;
      }
    } else {
      stagnant = 0;
    }
    prev_loss = rep.value;

    std::vector<double> grad = {pg.d_tx, pg.d_theta_deg};
    if (config.algorithm == Algorithm::adam)
      adam_step(params, adam, grad, config);
    else
      gd_step(params, grad, config);
    // keep iterates inside the pose invariants
    params[0] = std::clamp(params[0], -max_tx, max_tx);
    params[1] = std::clamp(params[1], -179.0, 179.0);
  }

  out.summary.final_pose = best_pose;
  out.summary.final_loss = best_loss;
  return out;
}

// A start that throws (e.g. its pose is invalid for this image) is reported
// as diverged; the other starts continue.
StartOutcome run_start(const Grid& source, const Grid& target,
                       const OptimConfig& config, const Pose2& start, int index) {
  try {
    return run_start_impl(source, target, config, start, index);
  } catch (const std::exception&) {
    StartOutcome out;
    out.summary.start_index = index;
    out.summary.initial_pose = start;
    out.summary.final_pose = start;
    out.summary.diverged = true;
    out.summary.final_loss = std::numeric_limits<double>::infinity();
    return out;
  }
}

}  // namespace

std::pair<Pose2, AlignmentTrace> align(const Grid& source, const Grid& target,
                                       const OptimConfig& config) {
  config.validate();
  if (!source.same_shape(target))
    throw std::invalid_argument("align: image shapes differ");
  const std::vector<Pose2> starts =
      config.multistart.empty() ? default_multistart() : config.multistart;

  unsigned nthreads = config.num_threads > 0
                          ? static_cast<unsigned>(config.num_threads)
                          : std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned>(nthreads, static_cast<unsigned>(starts.size()));

  auto parallel_for = [&](std::size_t count, auto&& body) {
    if (nthreads <= 1 || count <= 1) {
      for (std::size_t i = 0; i < count; ++i) body(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        body(i);
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads && t < count; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  };

  // Triage pass: score every start, keep the most promising K.
  std::vector<std::uint8_t> kept(starts.size(), 1);
  std::vector<double> initial_losses(starts.size(),
                                     std::numeric_limits<double>::infinity());
  const bool triage = config.multistart_keep > 0 &&
                      static_cast<std::size_t>(config.multistart_keep) < starts.size();
  if (triage) {
    parallel_for(starts.size(), [&](std::size_t i) {
      try {
        const Grid warped = warp_rigid(source, starts[i]);
        initial_losses[i] =
            evaluate_loss(config.loss, target, warped, config.bins, false).value;
      } catch (const std::exception&) {
      }
    });
    std::vector<std::size_t> order(starts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return initial_losses[a] < initial_losses[b];
    });
    std::fill(kept.begin(), kept.end(), 0);
    for (int k = 0; k < config.multistart_keep; ++k) kept[order[k]] = 1;
  }

  std::vector<StartOutcome> outcomes(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) {
    if (kept[i]) {
      outcomes[i] = run_start(source, target, config, starts[i], static_cast<int>(i));
    } else {
      StartOutcome& out = outcomes[i];
      out.summary.start_index = static_cast<int>(i);
      out.summary.initial_pose = starts[i];
      out.summary.final_pose = starts[i];
      out.summary.initial_loss = initial_losses[i];
      out.summary.final_loss = initial_losses[i];
      out.summary.diverged = !std::isfinite(initial_losses[i]);
    }
  });

  // Deterministic merge: lowest final loss, ties by start index.
  int winner = -1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const StartSummary& s = outcomes[i].summary;
    if (s.diverged && s.iterations == 0) continue;
    if (s.final_loss < best) {
      best = s.final_loss;
      winner = static_cast<int>(i);
    }
  }
  if (winner < 0) throw std::runtime_error("align: every start diverged");

  AlignmentTrace trace;
  trace.records = std::move(outcomes[winner].records);
  for (const StartOutcome& o : outcomes) trace.starts.push_back(o.summary);
  trace.final_pose = outcomes[winner].summary.final_pose;
  trace.final_loss = outcomes[winner].summary.final_loss;
  trace.converged = outcomes[winner].summary.converged;
  trace.winning_start = winner;
  return {trace.final_pose, trace};
}

std::vector<double> GridRange::values() const {
  if (!(step > 0.0)) throw std::invalid_argument("grid range: step must be positive");
  if (hi < lo) throw std::invalid_argument("grid range: hi below lo");
  std::vector<double> vals;
  const double slack = step * 1e-9;
  for (double v = lo; v <= hi + slack; v += step) vals.push_back(v);
  return vals;
}

GridSearchResult grid_search_oracle(const Grid& source, const Grid& target,
                                    LossKind loss, const GridRange& tx_range,
                                    const GridRange& theta_range, int bins) {
  if (!source.same_shape(target))
    throw std::invalid_argument("grid_search_oracle: image shapes differ");
  GridSearchResult result;
  result.tx_values = tx_range.values();
  result.theta_values = theta_range.values();
  if (result.tx_values.empty() || result.theta_values.empty())
    throw std::invalid_argument("grid_search_oracle: empty grid");
  result.surface.assign(result.tx_values.size() * result.theta_values.size(), 0.0);

  const std::size_t total = result.surface.size();
  std::vector<double> flat(total);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error_text;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t k = next.fetch_add(1);
      if (k >= total) return;
      try {
        const std::size_t r = k / result.theta_values.size();
        const std::size_t c = k % result.theta_values.size();
        const Pose2 pose{result.tx_values[r], result.theta_values[c]};
        const Grid warped = warp_rigid(source, pose);
        flat[k] = evaluate_loss(loss, target, warped, bins, false).value;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) error_text = e.what();
      }
    }
  };
  unsigned nthreads = std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned>(nthreads, static_cast<unsigned>(total));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failed.load()) throw std::invalid_argument("grid_search_oracle: " + error_text);
  result.surface = std::move(flat);

  std::size_t best_k = 0;
  bool first = true;
  for (std::size_t k = 0; k < total; ++k) {
    if (first) {
      best_k = k;
      first = false;
      continue;
    }
    const double v = result.surface[k];
    const double b = result.surface[best_k];
    if (v < b) {
      best_k = k;
    } else if (v == b) {
      const double tx = result.tx_values[k / result.theta_values.size()];
      const double th = result.theta_values[k % result.theta_values.size()];
      const double btx = result.tx_values[best_k / result.theta_values.size()];
      const double bth = result.theta_values[best_k % result.theta_values.size()];
      if (std::abs(tx) < std::abs(btx) ||
          (std::abs(tx) == std::abs(btx) && std::abs(th) < std::abs(bth)))
        best_k = k;
    }
  }
  result.best = Pose2{result.tx_values[best_k / result.theta_values.size()],
                      result.theta_values[best_k % result.theta_values.size()]};
  result.best_loss = result.surface[best_k];
  return result;
}

}  // namespace fuzzymi
