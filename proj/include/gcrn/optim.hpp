#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gcrn/cells.hpp"
#include "gcrn/matrix.hpp"

namespace gcrn {

enum class OptimizerKind { rmsprop, clipped_sgd };

const char* to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::rmsprop;
    double learning_rate = 1e-3;  // rmsprop default; clipped_sgd uses 1.0
    double decay_rate = 0.9;      // rmsprop second-moment decay
    double epsilon = 1e-8;
    double max_grad_norm = 5.0;      // clipped_sgd
    std::size_t sched_start = 4;     // clipped_sgd: halving begins after this epoch
};

/// Per-parameter accumulators, shapes mirroring the parameter list exactly.
/// Empty for clipped_sgd.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::rmsprop;
    std::vector<Matrix> acc;

    static OptimizerState init(OptimizerKind kind, const std::vector<TensorRef>& params);
};

/// Global L2 norm across every gradient tensor jointly.
double global_grad_norm(const std::vector<TensorRef>& grads);

/// acc <- decay * acc + (1 - decay) * g^2; p <- p - lr * g / sqrt(acc + eps).
void rmsprop_update(std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                    OptimizerState& state, const OptimizerConfig& cfg);

/// lr * 0.5^max(0, epoch - sched_start).
double sgd_learning_rate(const OptimizerConfig& cfg, std::size_t epoch);

/// Joint-norm clipping to max_grad_norm (direction preserved), then a plain
/// SGD step at the scheduled rate. Mutates grads when clipping applies.
void clipped_sgd_update(std::vector<TensorRef>& params, std::vector<TensorRef>& grads,
                        OptimizerState& state, const OptimizerConfig& cfg,
                        std::size_t epoch);

/// Dispatches to the configured rule.
void optimizer_update(std::vector<TensorRef>& params, std::vector<TensorRef>& grads,
                      OptimizerState& state, const OptimizerConfig& cfg,
                      std::size_t epoch);

}  // namespace gcrn
