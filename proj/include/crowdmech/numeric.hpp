#pragma once

#include <cmath>

namespace crowdmech {

/// 1 / (1 + e^{-x}) without overflow for large |x|.
inline double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace crowdmech
