// Neumaier-compensated accumulation shared by the kernel TUs. Unlike plain
// Kahan, the compensation survives addends larger than the running sum.

#pragma once

#include <cmath>

namespace fuzzymi::kernels {

struct NeumaierSum {
  double sum = 0.0;
  double comp = 0.0;

  inline void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }

  inline double total() const { return sum + comp; }
};

}  // namespace fuzzymi::kernels
