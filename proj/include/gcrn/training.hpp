#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcrn/data.hpp"
#include "gcrn/model.hpp"
#include "gcrn/optim.hpp"
#include "gcrn/sparse.hpp"

namespace gcrn {

struct TrainConfig {
    std::size_t unroll_steps = 20;
    std::size_t batch_size = 20;
    std::size_t epochs = 13;
    double dropout_keep = 1.0;  // keep probability; 1 disables dropout
    std::size_t early_stop_patience = 3;
    std::uint64_t seed = 1;
    bool deterministic = true;

    void validate() const;
};

/// Inverted-dropout mask: entries are 0 or 1/keep_prob, so expectation is
/// preserved. keep_prob = 1 yields the all-ones identity mask.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double keep_prob, Rng& rng);

/// x masked by a fresh Bernoulli(keep_prob) draw.
Matrix dropout_apply(const Matrix& x, double keep_prob, Rng& rng);

/// Worker cap: GCRN_THREADS when set, else the hardware count, never more
/// than jobs.
std::size_t worker_count(std::size_t jobs);

struct BpttResult {
    double loss = 0.0;   // mean over every predicted frame/position
    Model grads;         // exact gradients of that mean
};

/// Teacher-forced forward over the batch followed by the exact reverse sweep.
/// Dropout (training mode only) masks cell inputs, the signals between
/// stacked cells and the readout input; recurrent paths are never masked.
/// Batch elements are processed independently (possibly in parallel) and
/// reduced in fixed element order. Throws NumericError (carrying the step)
/// if a non-finite loss appears.
BpttResult bptt(const Model& model, const SequenceBatch& batch, const SparseMatrix& lt,
                double dropout_keep, std::uint64_t dropout_seed, bool training = true);

/// Mean loss over all batches, dropout off.
double evaluate_loss(const Model& model, std::span<const SequenceBatch> batches,
                     const SparseMatrix& lt);

struct MetricsRow {
    std::size_t epoch;
    std::string split;  // "train" | "valid"
    double loss;
    std::optional<double> perplexity;  // token tasks only
    std::int64_t wall_ms;
};

/// Counters that survive a checkpoint/resume cycle.
struct TrainState {
    std::size_t epoch = 0;  // next epoch to run
    double best_valid = std::numeric_limits<double>::infinity();
    std::size_t since_improve = 0;
};

using EpochHook = std::function<void(const MetricsRow& train_row, const MetricsRow& valid_row,
                                     const Model& model, const OptimizerState& opt,
                                     const TrainState& state, bool improved)>;

/// Epoch loop with per-epoch deterministic batch shuffling, validation and
/// early stopping on validation loss. best_model tracks the best-validation
/// parameters. Returns the metrics rows of the epochs actually run.
std::vector<MetricsRow> train_loop(Model& model, OptimizerState& opt_state,
                                   TrainState& state,
                                   const std::vector<SequenceBatch>& train_batches,
                                   const std::vector<SequenceBatch>& valid_batches,
                                   const SparseMatrix& lt, const TrainConfig& tcfg,
                                   const OptimizerConfig& ocfg, Model* best_model,
                                   const EpochHook& hook = {});

}  // namespace gcrn
