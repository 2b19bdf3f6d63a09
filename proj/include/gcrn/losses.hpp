#pragma once

#include <cstddef>
#include <span>

#include "gcrn/matrix.hpp"

namespace gcrn {

struct LossResult {
    double loss;
    Matrix grad;
};

/// Mean binary cross-entropy over all elements. Predictions are clamped to
/// [1e-12, 1 - 1e-12] before the logs; the gradient is exact for the clamped
/// form (zero where the clamp is active). Targets must lie in [0, 1].
LossResult binary_cross_entropy(const Matrix& pred, const Matrix& target);

/// Mean softmax cross-entropy. Each row of logits is one position; targets
/// holds the true class index per row. Log-sum-exp evaluated stably; the
/// gradient is (softmax - one_hot) / n_rows.
LossResult softmax_cross_entropy(const Matrix& logits,
                                 std::span<const std::size_t> targets);

/// exp of the mean negative log-likelihood.
double perplexity(double mean_nll);

}  // namespace gcrn
