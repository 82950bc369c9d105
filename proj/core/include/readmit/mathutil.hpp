#pragma once

#include <cmath>

namespace readmit {

inline double sigmoid(double x) {
  // Split on sign to avoid overflow in exp for large |x|.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Round half away from zero; the convention used for point scores.
inline long long round_half_away(double x) {
  return x >= 0.0 ? static_cast<long long>(std::floor(x + 0.5))
                  : static_cast<long long>(std::ceil(x - 0.5));
}

}  // namespace readmit
