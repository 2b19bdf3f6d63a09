#include "gcrn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gcrn/errors.hpp"

namespace gcrn {

namespace {
constexpr double kClamp = 1e-12;
}

LossResult binary_cross_entropy(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) {
        throw DimensionError("binary_cross_entropy: prediction/target shape mismatch");
    }
    if (pred.size() == 0) throw ValueError("binary_cross_entropy: empty input");

    auto pd = pred.data();
    auto td = target.data();
    LossResult out{0.0, Matrix(pred.rows(), pred.cols())};
    auto gd = out.grad.data();
    const double inv_n = 1.0 / static_cast<double>(pred.size());

    double acc = 0.0;
    for (std::size_t i = 0; i < pd.size(); ++i) {
        const double t = td[i];
        if (!(t >= 0.0 && t <= 1.0)) {
            throw ValueError("binary_cross_entropy: target outside [0, 1]");
        }
        const double p = std::clamp(pd[i], kClamp, 1.0 - kClamp);
        acc += -(t * std::log(p) + (1.0 - t) * std::log1p(-p));
        // Clamped entries have zero derivative with respect to the raw input.
        if (pd[i] > kClamp && pd[i] < 1.0 - kClamp) {
            gd[i] = (p - t) / (p * (1.0 - p)) * inv_n;
        }
    }
    out.loss = acc * inv_n;
    return out;
}

LossResult softmax_cross_entropy(const Matrix& logits,
                                 std::span<const std::size_t> targets) {
    if (logits.rows() != targets.size()) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(logits.rows()) +
                             " logit rows vs " + std::to_string(targets.size()) +
                             " targets");
    }
    if (logits.size() == 0) throw ValueError("softmax_cross_entropy: empty input");
    if (!logits.all_finite()) throw ValueError("softmax_cross_entropy: non-finite logit");

    const std::size_t classes = logits.cols();
    LossResult out{0.0, Matrix(logits.rows(), classes)};
    const double inv_n = 1.0 / static_cast<double>(logits.rows());

    double acc = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const std::size_t t = targets[i];
        if (t >= classes) {
            throw ValueError("softmax_cross_entropy: target id " + std::to_string(t) +
                             " out of range for " + std::to_string(classes) + " classes");
        }
        double max_logit = logits(i, 0);
        for (std::size_t j = 1; j < classes; ++j) {
            max_logit = std::max(max_logit, logits(i, j));
        }
        double sum_exp = 0.0;
        for (std::size_t j = 0; j < classes; ++j) {
            sum_exp += std::exp(logits(i, j) - max_logit);
        }
        const double lse = max_logit + std::log(sum_exp);
        acc += lse - logits(i, t);
        for (std::size_t j = 0; j < classes; ++j) {
            const double soft = std::exp(logits(i, j) - max_logit) / sum_exp;
            out.grad(i, j) = (soft - (j == t ? 1.0 : 0.0)) * inv_n;
        }
    }
    out.loss = acc * inv_n;
    return out;
}

double perplexity(double mean_nll) {
    if (!std::isfinite(mean_nll)) throw ValueError("perplexity: non-finite input");
    return std::exp(mean_nll);
}

}  // namespace gcrn
