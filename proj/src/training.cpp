#include "gcrn/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "gcrn/errors.hpp"
#include "gcrn/losses.hpp"

namespace gcrn {

void TrainConfig::validate() const {
    if (unroll_steps < 1) throw ValueError("TrainConfig: unroll_steps must be >= 1");
    if (batch_size < 1) throw ValueError("TrainConfig: batch_size must be >= 1");
    if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) {
        throw ValueError("TrainConfig: dropout_keep must lie in (0, 1]");
    }
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double keep_prob, Rng& rng) {
    if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
        throw ValueError("dropout_mask: keep_prob must lie in (0, 1]");
    }
    if (keep_prob == 1.0) return Matrix::filled(rows, cols, 1.0);
    Matrix m(rows, cols);
    const double inv = 1.0 / keep_prob;
    for (double& v : m.data()) v = rng.bernoulli(keep_prob) ? inv : 0.0;
    return m;
}

Matrix dropout_apply(const Matrix& x, double keep_prob, Rng& rng) {
    return hadamard(x, dropout_mask(x.rows(), x.cols(), keep_prob, rng));
}

std::size_t worker_count(std::size_t jobs) {
    std::size_t cap = std::thread::hardware_concurrency();
    if (cap == 0) cap = 1;
    if (const char* env = std::getenv("GCRN_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) cap = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(cap, jobs));
}

namespace {

struct ElementOutcome {
    double loss_sum = 0.0;   // sum of per-frame mean losses over T steps
    std::size_t steps = 0;
    Model grads;
    std::size_t bad_step = SIZE_MAX;  // first non-finite step, if any
};

/// Forward + backward for one batch element. Dropout masks are derived from
/// (dropout_seed, element) alone so results are independent of scheduling.
ElementOutcome run_element(const Model& model, const SequenceBatch& batch,
                           std::size_t element, const SparseMatrix& lt,
                           double dropout_keep, std::uint64_t dropout_seed,
                           bool training, bool want_grads) {
    const std::size_t t_len = batch.time_steps();
    const std::size_t layers = model.cells.size();
    const bool use_dropout = training && dropout_keep < 1.0;
    Rng drop_rng(Rng::derive(dropout_seed, 0xd309 + element));

    ElementOutcome out;
    out.steps = t_len;
    if (want_grads) out.grads = model_zeros(model.spec);

    std::vector<CellState> states;
    states.reserve(layers);
    for (const CellParams& c : model.cells) states.push_back(initial_state(c.spec));

    // Per-step records for the reverse sweep.
    std::vector<std::vector<CellCache>> caches(t_len, std::vector<CellCache>(layers));
    std::vector<ReadoutCache> ro_caches(t_len);
    std::vector<Matrix> loss_grads(t_len);
    std::vector<std::vector<Matrix>> masks(t_len);  // [t][layers + 1] when dropout on

    for (std::size_t t = 0; t < t_len; ++t) {
        Matrix x = batch.inputs[t][element];
        if (use_dropout) {
            masks[t].resize(layers + 1);
            masks[t][0] = dropout_mask(x.rows(), x.cols(), dropout_keep, drop_rng);
            x = hadamard(x, masks[t][0]);
        }
        for (std::size_t l = 0; l < layers; ++l) {
            states[l] = cell_step(model.cells[l], &lt, x, states[l], caches[t][l]);
            x = states[l].h;
            if (use_dropout) {
                masks[t][l + 1] = dropout_mask(x.rows(), x.cols(), dropout_keep, drop_rng);
                x = hadamard(x, masks[t][l + 1]);
            }
        }
        const Matrix output = readout_forward(model, &lt, x, ro_caches[t]);

        LossResult lr{0.0, Matrix()};
        if (batch.has_tokens()) {
            const std::size_t target[1] = {batch.token_targets[t][element]};
            lr = softmax_cross_entropy(output, target);
        } else {
            lr = binary_cross_entropy(output, batch.dense_targets[t][element]);
        }
        if (!std::isfinite(lr.loss)) {
            out.bad_step = t;
            return out;
        }
        out.loss_sum += lr.loss;
        loss_grads[t] = std::move(lr.grad);
    }

    if (!want_grads) return out;

    // Reverse sweep. Loss gradients are scaled so the sum below differentiates
    // the mean over every (step, element) of the batch.
    const double scale =
        1.0 / (static_cast<double>(t_len) * static_cast<double>(batch.batch_size()));
    std::vector<CellState> d_next(layers);  // empty matrices read as zero

    for (std::size_t t = t_len; t-- > 0;) {
        // loss_grads[t] differentiates that frame's own mean; scale it to the
        // contribution of the (step, element) mean over the whole batch.
        Matrix d_out = loss_grads[t];
        for (double& v : d_out.data()) v *= scale;

        Matrix d_from_above = readout_backward(model, &lt, ro_caches[t], d_out, out.grads);
        for (std::size_t l = layers; l-- > 0;) {
            if (use_dropout) {
                d_from_above = hadamard(d_from_above, masks[t][l + 1]);
            }
            CellBackward bk = cell_backward(model.cells[l], &lt, caches[t][l],
                                            d_from_above, d_next[l], out.grads.cells[l]);
            d_next[l] = std::move(bk.d_prev);
            d_from_above = std::move(bk.d_x);
        }
        // d_from_above is now the cotangent of the raw input frame; inputs are
        // data, nothing to accumulate.
    }
    return out;
}

}  // namespace

BpttResult bptt(const Model& model, const SequenceBatch& batch, const SparseMatrix& lt,
                double dropout_keep, std::uint64_t dropout_seed, bool training) {
    const std::size_t b_count = batch.batch_size();
    if (b_count == 0 || batch.time_steps() == 0) {
        throw ValueError("bptt: empty batch");
    }

    std::vector<ElementOutcome> results(b_count);
    const std::size_t workers = worker_count(b_count);
    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t e = lo; e < hi; ++e) {
            results[e] = run_element(model, batch, e, lt, dropout_keep, dropout_seed,
                                     training, true);
        }
    };
    if (workers <= 1) {
        run_range(0, b_count);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (b_count + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(b_count, lo + chunk);
            if (lo < hi) pool.emplace_back(run_range, lo, hi);
        }
        for (std::thread& th : pool) th.join();
    }

    // Fixed-order reduction keeps results independent of the worker split.
    BpttResult out;
    out.grads = model_zeros(model.spec);
    double loss_sum = 0.0;
    std::size_t step_count = 0;
    auto total = out.grads.tensors();
    for (std::size_t e = 0; e < b_count; ++e) {
        if (results[e].bad_step != SIZE_MAX) {
            throw NumericError("bptt: non-finite loss", results[e].bad_step);
        }
        loss_sum += results[e].loss_sum;
        step_count += results[e].steps;
        auto part = results[e].grads.tensors();
        for (std::size_t i = 0; i < total.size(); ++i) {
            axpy(*total[i].tensor, 1.0, *part[i].tensor);
        }
    }
    out.loss = loss_sum / static_cast<double>(step_count);
    return out;
}

double evaluate_loss(const Model& model, std::span<const SequenceBatch> batches,
                     const SparseMatrix& lt) {
    double loss_sum = 0.0;
    std::size_t count = 0;
    for (const SequenceBatch& batch : batches) {
        for (std::size_t e = 0; e < batch.batch_size(); ++e) {
            ElementOutcome r = run_element(model, batch, e, lt, 1.0, 0, false, false);
            if (r.bad_step != SIZE_MAX) {
                throw NumericError("evaluate_loss: non-finite loss", r.bad_step);
            }
            loss_sum += r.loss_sum;
            count += r.steps;
        }
    }
    if (count == 0) throw ValueError("evaluate_loss: no data");
    return loss_sum / static_cast<double>(count);
}

std::vector<MetricsRow> train_loop(Model& model, OptimizerState& opt_state,
                                   TrainState& state,
                                   const std::vector<SequenceBatch>& train_batches,
                                   const std::vector<SequenceBatch>& valid_batches,
                                   const SparseMatrix& lt, const TrainConfig& tcfg,
                                   const OptimizerConfig& ocfg, Model* best_model,
                                   const EpochHook& hook) {
    tcfg.validate();
    if (train_batches.empty() || valid_batches.empty()) {
        throw ValueError("train_loop: empty dataset");
    }
    // Fail on dataset/model mismatch before epoch 0.
    {
        const Matrix& probe = train_batches.front().inputs.front().front();
        const CellSpec& front = model.spec.cells.front();
        if (probe.rows() != front.n || probe.cols() != front.d_x) {
            throw ValueError("train_loop: dataset frames are " +
                             std::to_string(probe.rows()) + "x" +
                             std::to_string(probe.cols()) + " but the model expects " +
                             std::to_string(front.n) + "x" + std::to_string(front.d_x));
        }
        const bool tokens = train_batches.front().has_tokens();
        if (tokens != (model.spec.readout == ReadoutKind::token_softmax)) {
            throw ValueError("train_loop: dataset task does not match the readout head");
        }
    }

    const bool token_task = train_batches.front().has_tokens();
    std::vector<MetricsRow> rows;
    auto params = model.tensors();

    for (std::size_t epoch = state.epoch; epoch < tcfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();

        std::vector<std::size_t> order(train_batches.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(Rng::derive(tcfg.seed, 0xe90c0000ULL + epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t bi = 0; bi < order.size(); ++bi) {
            const SequenceBatch& batch = train_batches[order[bi]];
            const std::uint64_t drop_seed =
                Rng::derive(tcfg.seed, (epoch << 24) ^ (bi << 4) ^ 0xd0ULL);
            BpttResult res = bptt(model, batch, lt, tcfg.dropout_keep, drop_seed, true);
            loss_sum += res.loss * static_cast<double>(batch.batch_size());
            loss_count += batch.batch_size();
            auto grads = res.grads.tensors();
            optimizer_update(params, grads, opt_state, ocfg, epoch);
        }
        const double train_loss = loss_sum / static_cast<double>(loss_count);
        const double valid_loss = evaluate_loss(model, valid_batches, lt);

        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
        const std::int64_t wall = tcfg.deterministic ? 0 : elapsed;

        MetricsRow train_row{epoch, "train", train_loss,
                             token_task ? std::optional<double>(perplexity(train_loss))
                                        : std::nullopt,
                             wall};
        MetricsRow valid_row{epoch, "valid", valid_loss,
                             token_task ? std::optional<double>(perplexity(valid_loss))
                                        : std::nullopt,
                             wall};
        rows.push_back(train_row);
        rows.push_back(valid_row);

        const bool improved = valid_loss < state.best_valid;
        if (improved) {
            state.best_valid = valid_loss;
            state.since_improve = 0;
            if (best_model) *best_model = model;
        } else {
            ++state.since_improve;
        }
        state.epoch = epoch + 1;
        if (hook) hook(train_row, valid_row, model, opt_state, state, improved);

        if (state.since_improve > tcfg.early_stop_patience) break;
    }
    return rows;
}

}  // namespace gcrn
