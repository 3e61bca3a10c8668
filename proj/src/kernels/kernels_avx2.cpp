// AVX2 kernel variants. Semantics defined by kernels_scalar.cpp; the
// equivalence tests hold these to bit-exact agreement for bin_split and to
// rounding-level agreement for the reductions and warp kernels (FMA and
// lane-wise accumulation reorder the arithmetic).

#if defined(FUZZYMI_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "fuzzymi/kernels.hpp"
#include "sum_impl.hpp"

namespace fuzzymi::kernels::avx2 {

namespace {

inline __m256d abs_pd(__m256d x) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  return _mm256_and_pd(x, mask);
}

// Lane-wise Neumaier accumulation: compensation survives addends larger
// than the running lane sum.
struct NeumaierLanes {
  __m256d s = _mm256_setzero_pd();
  __m256d c = _mm256_setzero_pd();

  inline void add(__m256d x) {
    const __m256d t = _mm256_add_pd(s, x);
    const __m256d big_first = _mm256_add_pd(_mm256_sub_pd(s, t), x);
    const __m256d small_first = _mm256_add_pd(_mm256_sub_pd(x, t), s);
    const __m256d s_bigger = _mm256_cmp_pd(abs_pd(s), abs_pd(x), _CMP_GE_OQ);
    c = _mm256_add_pd(c, _mm256_blendv_pd(small_first, big_first, s_bigger));
    s = t;
  }

  // Fold lanes plus a scalar tail accumulator into one compensated total.
  double total(const NeumaierSum& tail) const {
    alignas(32) double sv[4], cv[4];
    _mm256_store_pd(sv, s);
    _mm256_store_pd(cv, c);
    NeumaierSum acc;
    for (int i = 0; i < 4; ++i) acc.add(sv[i]);
    for (int i = 0; i < 4; ++i) acc.add(cv[i]);
    acc.add(tail.sum);
    acc.add(tail.comp);
    return acc.total();
  }
};

}  // namespace

double reduce_sum(std::span<const double> v) {
  NeumaierLanes k;
  std::size_t i = 0;
  for (; i + 4 <= v.size(); i += 4) k.add(_mm256_loadu_pd(v.data() + i));
  NeumaierSum tail;
  for (; i < v.size(); ++i) tail.add(v[i]);
  return k.total(tail);
}

double reduce_abs_diff(std::span<const double> a, std::span<const double> b) {
  NeumaierLanes k;
  std::size_t i = 0;
  for (; i + 4 <= a.size(); i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i),
                                    _mm256_loadu_pd(b.data() + i));
    k.add(abs_pd(d));
  }
  NeumaierSum tail;
  for (; i < a.size(); ++i) tail.add(std::abs(a[i] - b[i]));
  return k.total(tail);
}

double reduce_sq_diff(std::span<const double> a, std::span<const double> b) {
  NeumaierLanes k;
  std::size_t i = 0;
  for (; i + 4 <= a.size(); i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i),
                                    _mm256_loadu_pd(b.data() + i));
    k.add(_mm256_mul_pd(d, d));
  }
  NeumaierSum tail;
  for (; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    tail.add(d * d);
  }
  return k.total(tail);
}

void minmax(std::span<const double> v, double& lo, double& hi) {
  if (v.empty()) {
    lo = hi = 0.0;
    return;
  }
  __m256d vlo = _mm256_set1_pd(v[0]);
  __m256d vhi = vlo;
  std::size_t i = 0;
  for (; i + 4 <= v.size(); i += 4) {
    const __m256d x = _mm256_loadu_pd(v.data() + i);
    vlo = _mm256_min_pd(vlo, x);
    vhi = _mm256_max_pd(vhi, x);
  }
  alignas(32) double lv[4], hv[4];
  _mm256_store_pd(lv, vlo);
  _mm256_store_pd(hv, vhi);
  double a = lv[0], b = hv[0];
  for (int j = 1; j < 4; ++j) {
    a = std::min(a, lv[j]);
    b = std::max(b, hv[j]);
  }
  for (; i < v.size(); ++i) {
    a = std::min(a, v[i]);
    b = std::max(b, v[i]);
  }
  lo = a;
  hi = b;
}

void bin_split(std::span<const double> samples, double range_min,
               double inv_bin_width, int bins,
               std::span<std::int32_t> bin0, std::span<double> frac) {
  // mul/sub/min/max/floor only: bit-identical to the scalar reference.
  const __m256d vmin = _mm256_set1_pd(range_min);
  const __m256d vinv = _mm256_set1_pd(inv_bin_width);
  const __m256d vzero = _mm256_setzero_pd();
  const __m256d vtop = _mm256_set1_pd(static_cast<double>(bins - 1));
  std::size_t i = 0;
  for (; i + 4 <= samples.size(); i += 4) {
    __m256d xb = _mm256_mul_pd(
        _mm256_sub_pd(_mm256_loadu_pd(samples.data() + i), vmin), vinv);
    xb = _mm256_min_pd(_mm256_max_pd(xb, vzero), vtop);
    const __m256d b = _mm256_floor_pd(xb);
    const __m128i bi = _mm256_cvttpd_epi32(b);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(bin0.data() + i), bi);
    _mm256_storeu_pd(frac.data() + i, _mm256_sub_pd(xb, b));
  }
  const double top = static_cast<double>(bins - 1);
  for (; i < samples.size(); ++i) {
    double xb = (samples[i] - range_min) * inv_bin_width;
    xb = std::min(std::max(xb, 0.0), top);
    const double b = std::floor(xb);
    bin0[i] = static_cast<std::int32_t>(b);
    frac[i] = xb - b;
  }
}

void soft_joint_backward(std::span<const double> dl_djoint, int bins,
                         std::span<const std::int32_t> xbin0,
                         std::span<const double> xfrac,
                         std::span<const std::int32_t> ybin0,
                         std::span<const double> yfrac,
                         double coeff, std::span<double> dl_dy) {
  const double* P = dl_djoint.data();
  const __m128i vone = _mm_set1_epi32(1);
  const __m128i vtop = _mm_set1_epi32(bins - 1);
  const __m128i vbins = _mm_set1_epi32(bins);
  const __m256d vcoeff = _mm256_set1_pd(coeff);
  const __m256d vones = _mm256_set1_pd(1.0);
  std::size_t k = 0;
  for (; k + 4 <= xbin0.size(); k += 4) {
    const __m128i x0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(xbin0.data() + k));
    const __m128i y0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(ybin0.data() + k));
    const __m128i x1 = _mm_min_epi32(_mm_add_epi32(x0, vone), vtop);
    const __m128i y1 = _mm_min_epi32(_mm_add_epi32(y0, vone), vtop);
    const __m128i rx0 = _mm_mullo_epi32(x0, vbins);
    const __m128i rx1 = _mm_mullo_epi32(x1, vbins);
    const __m256d p00 = _mm256_i32gather_pd(P, _mm_add_epi32(rx0, y0), 8);
    const __m256d p01 = _mm256_i32gather_pd(P, _mm_add_epi32(rx0, y1), 8);
    const __m256d p10 = _mm256_i32gather_pd(P, _mm_add_epi32(rx1, y0), 8);
    const __m256d p11 = _mm256_i32gather_pd(P, _mm_add_epi32(rx1, y1), 8);
    const __m256d fx = _mm256_loadu_pd(xfrac.data() + k);
    const __m256d row0 = _mm256_sub_pd(p01, p00);
    const __m256d row1 = _mm256_sub_pd(p11, p10);
    const __m256d g = _mm256_add_pd(
        _mm256_mul_pd(_mm256_sub_pd(vones, fx), row0), _mm256_mul_pd(fx, row1));
    _mm256_storeu_pd(dl_dy.data() + k, _mm256_mul_pd(vcoeff, g));
  }
  const int top = bins - 1;
  for (; k < xbin0.size(); ++k) {
    const int x0 = xbin0[k];
    const int y0 = ybin0[k];
    const int x1 = std::min(x0 + 1, top);
    const int y1 = std::min(y0 + 1, top);
    const double fx = xfrac[k];
    const double row0 = P[x0 * bins + y1] - P[x0 * bins + y0];
    const double row1 = P[x1 * bins + y1] - P[x1 * bins + y0];
    dl_dy[k] = coeff * ((1.0 - fx) * row0 + fx * row1);
  }
  (void)yfrac;
}

namespace {

// Gathers the four bilinear corners around (sx, sy) with zero fill outside
// the image, and returns value plus spatial derivatives, 4 pixels at a time.
struct BilinearLanes {
  __m256d value, gx, gy;
};

inline BilinearLanes gather_bilinear(const double* src, int w, int h,
                                     __m256d sx, __m256d sy) {
  const __m256d fx0 = _mm256_floor_pd(sx);
  const __m256d fy0 = _mm256_floor_pd(sy);
  const __m256d ax = _mm256_sub_pd(sx, fx0);
  const __m256d ay = _mm256_sub_pd(sy, fy0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d wd = _mm256_set1_pd(static_cast<double>(w));
  const __m256d hd = _mm256_set1_pd(static_cast<double>(h));
  const __m256d zero = _mm256_setzero_pd();

  const __m256d fx1 = _mm256_add_pd(fx0, one);
  const __m256d fy1 = _mm256_add_pd(fy0, one);

  auto in_x = [&](__m256d fx) {
    return _mm256_and_pd(_mm256_cmp_pd(fx, zero, _CMP_GE_OQ),
                         _mm256_cmp_pd(fx, wd, _CMP_LT_OQ));
  };
  auto in_y = [&](__m256d fy) {
    return _mm256_and_pd(_mm256_cmp_pd(fy, zero, _CMP_GE_OQ),
                         _mm256_cmp_pd(fy, hd, _CMP_LT_OQ));
  };
  const __m256d okx0 = in_x(fx0), okx1 = in_x(fx1);
  const __m256d oky0 = in_y(fy0), oky1 = in_y(fy1);

  // Clamp indices so even masked-off lanes hold safe addresses.
  const __m256d cx0 = _mm256_min_pd(_mm256_max_pd(fx0, zero), _mm256_sub_pd(wd, one));
  const __m256d cx1 = _mm256_min_pd(_mm256_max_pd(fx1, zero), _mm256_sub_pd(wd, one));
  const __m256d cy0 = _mm256_min_pd(_mm256_max_pd(fy0, zero), _mm256_sub_pd(hd, one));
  const __m256d cy1 = _mm256_min_pd(_mm256_max_pd(fy1, zero), _mm256_sub_pd(hd, one));

  const __m128i ix0 = _mm256_cvttpd_epi32(cx0);
  const __m128i ix1 = _mm256_cvttpd_epi32(cx1);
  const __m128i iy0 = _mm256_cvttpd_epi32(cy0);
  const __m128i iy1 = _mm256_cvttpd_epi32(cy1);
  const __m128i vw = _mm_set1_epi32(w);

  auto gather = [&](__m128i iy, __m128i ix, __m256d mask) {
    const __m128i idx = _mm_add_epi32(_mm_mullo_epi32(iy, vw), ix);
    return _mm256_mask_i32gather_pd(zero, src, idx, mask, 8);
  };
  const __m256d v00 = gather(iy0, ix0, _mm256_and_pd(okx0, oky0));
  const __m256d v10 = gather(iy0, ix1, _mm256_and_pd(okx1, oky0));
  const __m256d v01 = gather(iy1, ix0, _mm256_and_pd(okx0, oky1));
  const __m256d v11 = gather(iy1, ix1, _mm256_and_pd(okx1, oky1));

  const __m256d bx = _mm256_sub_pd(one, ax);
  const __m256d by = _mm256_sub_pd(one, ay);
  BilinearLanes r;
  r.value = _mm256_add_pd(
      _mm256_add_pd(_mm256_mul_pd(_mm256_mul_pd(v00, bx), by),
                    _mm256_mul_pd(_mm256_mul_pd(v10, ax), by)),
      _mm256_add_pd(_mm256_mul_pd(_mm256_mul_pd(v01, bx), ay),
                    _mm256_mul_pd(_mm256_mul_pd(v11, ax), ay)));
  r.gx = _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(v10, v00), by),
                       _mm256_mul_pd(_mm256_sub_pd(v11, v01), ay));
  r.gy = _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(v01, v00), bx),
                       _mm256_mul_pd(_mm256_sub_pd(v11, v10), ax));
  return r;
}

// Plain array so no AVX instruction runs before dispatch has checked cpuid.
alignas(32) constexpr double kLaneOffsetData[4] = {0.0, 1.0, 2.0, 3.0};

inline __m256d lane_offsets() { return _mm256_load_pd(kLaneOffsetData); }

}  // namespace

void warp_bilinear(const double* src, int width, int height,
                   const RigidMap& m, double* out) {
  const __m256d vcos = _mm256_set1_pd(m.cos_t);
  const __m256d vsin = _mm256_set1_pd(m.sin_t);
  for (int v = 0; v < height; ++v) {
    const double dy = v - m.cy;
    const __m256d bx = _mm256_set1_pd(m.sin_t * dy + m.cx - m.tx);
    const __m256d by = _mm256_set1_pd(m.cos_t * dy + m.cy);
    int u = 0;
    for (; u + 4 <= width; u += 4) {
      const __m256d du = _mm256_add_pd(_mm256_set1_pd(u - m.cx), lane_offsets());
      const __m256d sx = _mm256_fmadd_pd(vcos, du, bx);
      const __m256d sy = _mm256_fnmadd_pd(vsin, du, by);
      const BilinearLanes s = gather_bilinear(src, width, height, sx, sy);
      _mm256_storeu_pd(out + v * width + u, s.value);
    }
    for (; u < width; ++u) {
      const double du = u - m.cx;
      const double sx = m.cos_t * du + (m.sin_t * dy + m.cx - m.tx);
      const double sy = -m.sin_t * du + (m.cos_t * dy + m.cy);
      // scalar tail via the reference path
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double ax = sx - std::floor(sx);
      const double ay = sy - std::floor(sy);
      auto at = [&](int x, int y) -> double {
        if (x < 0 || x >= width || y < 0 || y >= height) return 0.0;
        return src[y * width + x];
      };
      out[v * width + u] = at(x0, y0) * (1 - ax) * (1 - ay) +
                           at(x0 + 1, y0) * ax * (1 - ay) +
                           at(x0, y0 + 1) * (1 - ax) * ay +
                           at(x0 + 1, y0 + 1) * ax * ay;
    }
  }
}

void warp_pose_backward(const double* src, int width, int height,
                        const RigidMap& m, const double* dl_dout,
                        double& dl_dtx, double& dl_dtheta_rad) {
  const __m256d vcos = _mm256_set1_pd(m.cos_t);
  const __m256d vsin = _mm256_set1_pd(m.sin_t);
  const __m256d vcx = _mm256_set1_pd(m.cx);
  const __m256d vcy = _mm256_set1_pd(m.cy);
  const __m256d vtx = _mm256_set1_pd(m.tx);
  NeumaierLanes ktx, kth;
  NeumaierSum tail_tx, tail_th;
  for (int v = 0; v < height; ++v) {
    const double dy = v - m.cy;
    const __m256d bx = _mm256_set1_pd(m.sin_t * dy + m.cx - m.tx);
    const __m256d by = _mm256_set1_pd(m.cos_t * dy + m.cy);
    int u = 0;
    for (; u + 4 <= width; u += 4) {
      const __m256d g = _mm256_loadu_pd(dl_dout + v * width + u);
      const __m256d du = _mm256_add_pd(_mm256_set1_pd(u - m.cx), lane_offsets());
      const __m256d sx = _mm256_fmadd_pd(vcos, du, bx);
      const __m256d sy = _mm256_fnmadd_pd(vsin, du, by);
      const BilinearLanes s = gather_bilinear(src, width, height, sx, sy);
      ktx.add(_mm256_mul_pd(_mm256_sub_pd(_mm256_setzero_pd(), g), s.gx));
      const __m256d termx = _mm256_mul_pd(s.gx, _mm256_sub_pd(sy, vcy));
      const __m256d termy = _mm256_mul_pd(
          s.gy, _mm256_add_pd(_mm256_sub_pd(sx, vcx), vtx));
      kth.add(_mm256_mul_pd(g, _mm256_sub_pd(termx, termy)));
    }
    for (; u < width; ++u) {
      const double g = dl_dout[v * width + u];
      const double du = u - m.cx;
      const double sx = m.cos_t * du + (m.sin_t * dy + m.cx - m.tx);
      const double sy = -m.sin_t * du + (m.cos_t * dy + m.cy);
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double ax = sx - std::floor(sx);
      const double ay = sy - std::floor(sy);
      auto at = [&](int x, int y) -> double {
        if (x < 0 || x >= width || y < 0 || y >= height) return 0.0;
        return src[y * width + x];
      };
      const double v00 = at(x0, y0), v10 = at(x0 + 1, y0);
      const double v01 = at(x0, y0 + 1), v11 = at(x0 + 1, y0 + 1);
      const double gx = (v10 - v00) * (1 - ay) + (v11 - v01) * ay;
      const double gy = (v01 - v00) * (1 - ax) + (v11 - v10) * ax;
      tail_tx.add(-g * gx);
      tail_th.add(g * (gx * (sy - m.cy) - gy * (sx - m.cx + m.tx)));
    }
  }
  dl_dtx = ktx.total(tail_tx);
  dl_dtheta_rad = kth.total(tail_th);
}

}  // namespace fuzzymi::kernels::avx2

#endif  // FUZZYMI_HAVE_AVX2
