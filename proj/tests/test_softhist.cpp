#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "fuzzymi/gradcheck.hpp"
#include "fuzzymi/softhist.hpp"

using namespace fuzzymi;

namespace {

std::vector<double> random_samples(std::size_t n, std::mt19937_64& rng,
                                   double lo = 0.0, double hi = 255.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST_SUITE("softhist") {

TEST_CASE("bin_coordinates worked examples") {
  SUBCASE("midpoint splits evenly") {
    const BinAssignment a = bin_coordinates(127.5, 0.0, 255.0, 5);
    CHECK(a.xb == doctest::Approx(2.5));
    CHECK(a.x0 == 2);
    CHECK(a.x1 == 3);
    CHECK(a.m0 == doctest::Approx(0.5));
    CHECK(a.m1 == doctest::Approx(0.5));
  }
  SUBCASE("lower boundary") {
    const BinAssignment a = bin_coordinates(0.0, 0.0, 255.0, 5);
    CHECK(a.xb == 0.0);
    CHECK(a.x0 == 0);
    CHECK(a.x1 == 1);
    CHECK(a.m0 == 1.0);
    CHECK(a.m1 == 0.0);
  }
  SUBCASE("upper boundary clamps into the top bin") {
    const BinAssignment a = bin_coordinates(255.0, 0.0, 255.0, 5);
    CHECK(a.xb == 4.0);
    CHECK(a.x0 == 4);
    CHECK(a.x1 == 4);
    CHECK(a.m0 == 1.0);
    CHECK(a.m1 == 0.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(bin_coordinates(1.0, 0.0, 255.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(bin_coordinates(-1.0, 0.0, 255.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(bin_coordinates(1.0, 255.0, 0.0, 5), std::invalid_argument);
  }
}

TEST_CASE("membership partition of unity over random inputs") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const double x = random_samples(1, rng)[0];
    const BinAssignment a = bin_coordinates(x, 0.0, 255.0, 11);
    CHECK(a.m0 >= 0.0);
    CHECK(a.m1 >= 0.0);
    CHECK(a.m0 <= 1.0);
    CHECK(a.m1 <= 1.0);
    CHECK(std::abs(a.m0 + a.m1 - 1.0) <= 1e-12);
    CHECK(a.x0 <= a.x1);
    CHECK(a.x1 - a.x0 <= 1);
    CHECK(a.x1 <= 10);
  }
}

TEST_CASE("soft_hist_1d hand-evaluated example") {
  // 0 -> bin0 weight 1; 127.5 -> xb=1.0 -> bin1 weight 1; 255 -> clamped bin1.
  const std::vector<double> samples = {0.0, 127.5, 255.0};
  const Histogram1D h = soft_hist_1d(samples, 2, 0.0, 255.0);
  CHECK(h.counts[0] == doctest::Approx(1.0));
  CHECK(h.counts[1] == doctest::Approx(2.0));
  CHECK_FALSE(h.normalized);
}

TEST_CASE("soft_hist_1d copies of an interior value split over two bins") {
  const int m = 37;
  const std::vector<double> samples(m, 100.0);  // xb = 100*5/255 = 1.96...
  const Histogram1D h = soft_hist_1d(samples, 5, 0.0, 255.0);
  CHECK(h.counts[1] > 0.0);
  CHECK(h.counts[2] > 0.0);
  CHECK(h.counts[0] == 0.0);
  CHECK(h.counts[3] == 0.0);
  CHECK(h.counts[1] + h.counts[2] == doctest::Approx(m));
}

TEST_CASE("samples at integral bin coordinates reproduce a hard histogram") {
  const int bins = 8;
  std::vector<double> samples;
  std::vector<double> expected(bins, 0.0);
  for (int k = 0; k < bins; ++k) {
    const double v = k * 255.0 / bins;
    for (int c = 0; c <= k; ++c) samples.push_back(v);
    expected[k] = k + 1.0;
  }
  const Histogram1D h = soft_hist_1d(samples, bins, 0.0, 255.0);
  for (int k = 0; k < bins; ++k) CHECK(h.counts[k] == expected[k]);  // exact
}

TEST_CASE("soft_hist_2d corner and mixed examples") {
  SUBCASE("extreme pairs land on the diagonal corners") {
    const std::vector<double> xs = {0.0, 255.0};
    const std::vector<double> ys = {0.0, 255.0};
    const JointHistogram j = soft_hist_2d(xs, ys, 2, 0.0, 255.0);
    CHECK(j.at(0, 0) == 1.0);
    CHECK(j.at(1, 1) == 1.0);
    CHECK(j.at(0, 1) == 0.0);
    CHECK(j.at(1, 0) == 0.0);
  }
  SUBCASE("single off-diagonal pair") {
    const std::vector<double> xs = {0.0};
    const std::vector<double> ys = {255.0};
    const JointHistogram j = soft_hist_2d(xs, ys, 2, 0.0, 255.0);
    CHECK(j.at(0, 1) == 1.0);
    CHECK(j.at(0, 0) == 0.0);
    CHECK(j.at(1, 0) == 0.0);
    CHECK(j.at(1, 1) == 0.0);
  }
  SUBCASE("fractional x splits its mass between two rows") {
    const std::vector<double> xs = {127.5};
    const std::vector<double> ys = {0.0};
    const JointHistogram j = soft_hist_2d(xs, ys, 5, 0.0, 255.0);
    CHECK(j.at(2, 0) == doctest::Approx(0.5));
    CHECK(j.at(3, 0) == doctest::Approx(0.5));
    CHECK(j.total() == doctest::Approx(1.0));
  }
  SUBCASE("errors") {
    const std::vector<double> a = {1.0, 2.0};
    const std::vector<double> b = {1.0};
    CHECK_THROWS_AS(soft_hist_2d(a, b, 2, 0.0, 255.0), std::invalid_argument);
    CHECK_THROWS_AS(soft_hist_2d({}, {}, 2, 0.0, 255.0), std::invalid_argument);
    const std::vector<double> out = {300.0};
    const std::vector<double> ok = {1.0};
    CHECK_THROWS_AS(soft_hist_2d(out, ok, 2, 0.0, 255.0), std::invalid_argument);
  }
}

TEST_CASE("mass conservation and marginal consistency over random inputs") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 64 + static_cast<std::size_t>(rng() % 512);
    const auto xs = random_samples(m, rng);
    const auto ys = random_samples(m, rng);
    const int bins = 3 + static_cast<int>(rng() % 14);

    const JointHistogram j = soft_hist_2d(xs, ys, bins, 0.0, 255.0);
    CHECK(std::abs(j.total() - static_cast<double>(m)) <= 1e-9 * m);

    const Histogram1D hx = soft_hist_1d(xs, bins, 0.0, 255.0);
    const Histogram1D hy = soft_hist_1d(ys, bins, 0.0, 255.0);
    for (int i = 0; i < bins; ++i) {
      double row = 0.0, col = 0.0;
      for (int k = 0; k < bins; ++k) {
        row += j.at(i, k);
        col += j.at(k, i);
      }
      CHECK(std::abs(row - hx.counts[i]) <= 1e-9);
      CHECK(std::abs(col - hy.counts[i]) <= 1e-9);
    }
  }
}

TEST_CASE("normalize") {
  Histogram1D h;
  h.counts = {1.0, 2.0};
  const Histogram1D n = normalize(h);
  CHECK(n.counts[0] == doctest::Approx(1.0 / 3.0));
  CHECK(n.counts[1] == doctest::Approx(2.0 / 3.0));
  CHECK(n.normalized);

  const Histogram1D again = normalize(n);
  CHECK(again.counts[0] == n.counts[0]);  // idempotent
  CHECK(again.counts[1] == n.counts[1]);

  Histogram1D zeros;
  zeros.counts = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(normalize(zeros), EmptyHistogramError);
}

TEST_CASE("marginals_from_joint") {
  SUBCASE("point mass") {
    JointHistogram j;
    j.bins = 2;
    j.counts = {1.0, 0.0, 0.0, 0.0};
    j.normalized = true;
    const auto [px, py] = marginals_from_joint(j);
    CHECK(px.counts[0] == 1.0);
    CHECK(px.counts[1] == 0.0);
    CHECK(py.counts[0] == 1.0);
    CHECK(py.counts[1] == 0.0);
  }
  SUBCASE("uniform") {
    JointHistogram j;
    j.bins = 2;
    j.counts = {0.25, 0.25, 0.25, 0.25};
    j.normalized = true;
    const auto [px, py] = marginals_from_joint(j);
    CHECK(px.counts[0] == doctest::Approx(0.5));
    CHECK(py.counts[1] == doctest::Approx(0.5));
  }
  SUBCASE("unnormalized input is rejected") {
    JointHistogram j;
    j.bins = 2;
    j.counts = {1.0, 0.0, 0.0, 1.0};
    CHECK_THROWS_AS(marginals_from_joint(j), std::invalid_argument);
  }
  SUBCASE("matches 1-D soft histograms of the underlying samples") {
    std::mt19937_64 rng(9);
    const auto xs = random_samples(400, rng);
    const auto ys = random_samples(400, rng);
    const int bins = 9;
    const auto [px, py] = marginals_from_joint(
        normalize(soft_hist_2d(xs, ys, bins, 0.0, 255.0)));
    const Histogram1D hx = normalize(soft_hist_1d(xs, bins, 0.0, 255.0));
    const Histogram1D hy = normalize(soft_hist_1d(ys, bins, 0.0, 255.0));
    for (int i = 0; i < bins; ++i) {
      CHECK(px.counts[i] == doctest::Approx(hx.counts[i]).epsilon(1e-9));
      CHECK(py.counts[i] == doctest::Approx(hy.counts[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("backward_samples") {
  std::mt19937_64 rng(13);
  const int bins = 6;

  SUBCASE("zero upstream gradient gives zero sample gradients") {
    const auto xs = random_samples(50, rng);
    const auto ys = random_samples(50, rng);
    const std::vector<double> zeros(bins * bins, 0.0);
    const SampleGradients g =
        backward_samples(zeros, bins, xs, ys, 0.0, 255.0, 50.0);
    for (double v : g.d_ys) CHECK(v == 0.0);
    CHECK_FALSE(g.d_xs.has_value());
  }

  SUBCASE("uniform upstream gradient cancels") {
    const std::vector<double> xs = {40.0};
    const std::vector<double> ys = {90.0};
    const std::vector<double> uniform(bins * bins, 0.7);
    const SampleGradients g =
        backward_samples(uniform, bins, xs, ys, 0.0, 255.0, 1.0);
    CHECK(std::abs(g.d_ys[0]) < 1e-15);
  }

  SUBCASE("matches the finite-difference oracle away from kinks") {
    const std::size_t m = 40;
    const auto xs = random_samples(m, rng, 2.0, 253.0);
    auto ys = random_samples(m, rng, 2.0, 253.0);
    std::vector<double> w(bins * bins);
    for (double& v : w) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);

    // loss = sum_ij w_ij p_ij as a black-box function of the y samples
    const auto loss = [&](std::span<const double> y) {
      const JointHistogram p =
          normalize(soft_hist_2d(xs, y, bins, 0.0, 255.0));
      double s = 0.0;
      for (std::size_t i = 0; i < p.counts.size(); ++i) s += w[i] * p.counts[i];
      return s;
    };

    std::vector<std::uint8_t> mask(m, 0);
    for (std::size_t k = 0; k < m; ++k) {
      const BinAssignment a = bin_coordinates(ys[k], 0.0, 255.0, bins);
      const double f = a.xb - std::floor(a.xb);
      if (std::min(f, 1.0 - f) < 1e-2) mask[k] = 1;
    }

    const SampleGradients analytic =
        backward_samples(w, bins, xs, ys, 0.0, 255.0, static_cast<double>(m));
    const std::vector<double> numeric = finite_diff(loss, ys, 1e-3, mask);
    const GradReport rep = compare(analytic.d_ys, numeric, 1e-12, 1e-6, mask);
    CHECK(rep.all_passed());
    CHECK(rep.num_checked + rep.num_skipped_kinks == m);
  }

  SUBCASE("x-side gradients behind the flag") {
    const auto xs = random_samples(30, rng, 2.0, 253.0);
    const auto ys = random_samples(30, rng, 2.0, 253.0);
    std::vector<double> w(bins * bins);
    for (double& v : w) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const SampleGradients g =
        backward_samples(w, bins, xs, ys, 0.0, 255.0, 30.0, /*with_dx=*/true);
    REQUIRE(g.d_xs.has_value());

    const auto loss = [&](std::span<const double> x) {
      const JointHistogram p = normalize(soft_hist_2d(x, ys, bins, 0.0, 255.0));
      double s = 0.0;
      for (std::size_t i = 0; i < p.counts.size(); ++i) s += w[i] * p.counts[i];
      return s;
    };
    std::vector<std::uint8_t> mask(xs.size(), 0);
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const BinAssignment a = bin_coordinates(xs[k], 0.0, 255.0, bins);
      const double f = a.xb - std::floor(a.xb);
      if (std::min(f, 1.0 - f) < 1e-2) mask[k] = 1;
    }
    const std::vector<double> numeric = finite_diff(loss, xs, 1e-3, mask);
    const GradReport rep = compare(*g.d_xs, numeric, 1e-12, 1e-6, mask);
    CHECK(rep.all_passed());
  }

  SUBCASE("errors") {
    const std::vector<double> xs = {1.0};
    const std::vector<double> ys = {1.0};
    const std::vector<double> bad_shape(bins * bins - 1, 0.0);
    CHECK_THROWS_AS(backward_samples(bad_shape, bins, xs, ys, 0.0, 255.0, 1.0),
                    std::invalid_argument);
    const std::vector<double> ok(bins * bins, 0.0);
    CHECK_THROWS_AS(backward_samples(ok, bins, xs, ys, 0.0, 255.0, 0.0),
                    std::invalid_argument);
  }
}

}  // TEST_SUITE
