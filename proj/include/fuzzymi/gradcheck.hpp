// gradcheck.hpp - central finite-difference verification for every
// differentiable operation in the library.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fuzzymi {

struct GradReport {
  double max_abs_error = 0.0;
  // Largest relative error among coordinates whose absolute error exceeds
  // abs_tol (coordinates already inside abs_tol pass outright).
  double max_rel_error = 0.0;
  std::ptrdiff_t worst_coordinate = -1;
  std::size_t num_checked = 0;
  std::size_t num_skipped_kinks = 0;
  std::size_t num_failed = 0;

  bool all_passed() const { return num_failed == 0; }
  void merge(const GradReport& other);

  std::string table() const;  // fixed-field text
  std::string csv() const;    // header + one row
};

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h per coordinate.
// Coordinates with a nonzero skip mask entry are left at 0 and never
// evaluated (they are reported as kinks by compare()).
std::vector<double> finite_diff(const ScalarFn& f, std::span<const double> point,
                                double step,
                                std::span<const std::uint8_t> skip = {});

// Per-coordinate pass iff |a-n| <= abs_tol or |a-n|/max(|a|,|n|) <= rel_tol.
// Masked coordinates count as skipped, not failed.
GradReport compare(std::span<const double> analytic, std::span<const double> numeric,
                   double abs_tol, double rel_tol,
                   std::span<const std::uint8_t> kink_mask = {});

class Grid;

// Kink predicates for the LMI image pipeline, computed from the forward
// pass. A prediction pixel is masked when
//   - its raw bin coordinate sits within frac_margin of an integer
//     (membership kink, and range-boundary pixels a finite-difference step
//     cannot probe), or
//   - a diagonal tie |p_dd - pX_d| / |p_dd - pY_d| < tie_margin exists on a
//     row (d = x0, x1) or column (d = y0, y1) the pixel touches; there the
//     sign(0) = 0 convention departs from the one-sided derivative.
std::vector<std::uint8_t> lmi_kink_mask(const Grid& target, const Grid& prediction,
                                        int bins, double frac_margin = 1e-2,
                                        double tie_margin = 1e-6);

struct Pose2;

// True when central pose probes (step_tx pixels, step_theta degrees) keep
// every bilinear sample point strictly inside its interpolation cell, so
// the warped loss is polynomial across the probe box and central
// differences carry no interpolation-kink error. Pose checks that fail
// this predicate are reported as skipped kinks, never silently compared.
bool warp_probe_is_kink_free(const Grid& src, const Pose2& pose,
                             double step_tx, double step_theta_deg);

}  // namespace fuzzymi
