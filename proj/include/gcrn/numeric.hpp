#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace gcrn {

/// Numerically stable logistic function.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Sums values in ascending order of magnitude-free value. The result depends
/// only on the multiset of inputs, not their arrangement, which is what makes
/// vertex relabeling bit-transparent through every sparse product.
inline double sum_canonical(std::vector<double>& terms) {
    if (terms.size() > 1) {
        std::sort(terms.begin(), terms.end());
    }
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc;
}

}  // namespace gcrn
