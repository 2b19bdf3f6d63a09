#include "gcrn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gcrn/errors.hpp"
#include "gcrn/graph.hpp"
#include "gcrn/rng.hpp"

namespace gcrn {

double gradcheck_relative_error(double analytic, double numeric) {
    const double denom = std::max({1e-4, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

double finite_difference_max_error(const std::function<double()>& loss,
                                   const std::vector<TensorRef>& tensors,
                                   const std::vector<ConstTensorRef>& analytic,
                                   double step) {
    if (tensors.size() != analytic.size()) {
        throw DimensionError("finite_difference_max_error: tensor list mismatch");
    }
    double worst = 0.0;
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        auto values = tensors[ti].tensor->data();
        auto grads = analytic[ti].tensor->data();
        if (values.size() != grads.size()) {
            throw DimensionError("finite_difference_max_error: shape mismatch on '" +
                                 tensors[ti].name + "'");
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double up = loss();
            values[i] = saved - step;
            const double down = loss();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            worst = std::max(worst, gradcheck_relative_error(grads[i], numeric));
        }
    }
    return worst;
}

double cell_gradcheck_trial(CellKind kind, std::uint64_t seed, bool corrupt_analytic) {
    Rng rng(Rng::derive(seed, 0x9cc0));

    CellSpec spec;
    spec.kind = kind;
    spec.n = 2 + rng.below(5);    // 2..6
    spec.d_x = 1 + rng.below(3);  // 1..3
    spec.d_h = 1 + rng.below(3);
    spec.k = is_graph_kind(kind) ? 1 + rng.below(3) : 1;
    const std::uint64_t peep_pick = rng.below(3);
    spec.peepholes = peep_pick == 0   ? PeepholeMode::disabled
                     : peep_pick == 1 ? PeepholeMode::shared
                                      : PeepholeMode::per_vertex;

    // Random connected-ish graph: ring plus a few chords, unit-ish weights.
    std::vector<Coo> triples;
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t j = (i + 1) % spec.n;
        if (i < j) {
            const double w = 0.5 + rng.uniform();
            triples.push_back({i, j, w});
            triples.push_back({j, i, w});
        }
    }
    if (spec.n > 3 && rng.bernoulli(0.5)) {
        const double w = 0.5 + rng.uniform();
        triples.push_back({0, spec.n / 2, w});
        triples.push_back({spec.n / 2, 0, w});
    }
    Graph graph(csr_from_coo(spec.n, spec.n, triples));
    const SparseMatrix& lt = graph.scaled_laplacian();

    CellParams params = cell_init(spec, rng.next_u64());
    // Nudge parameters off their symmetric init so gradients are generic.
    for (TensorRef& r : params.tensors()) {
        for (double& v : r.tensor->data()) v += rng.uniform(-0.05, 0.05);
    }

    Matrix x = Matrix::uniform(spec.n, spec.d_x, 1.0, rng);
    CellState prev = initial_state(spec);
    prev.h = Matrix::uniform(spec.n, spec.d_h, 0.8, rng);
    if (is_lstm_kind(kind)) prev.c = Matrix::uniform(spec.n, spec.d_h, 0.8, rng);

    // Random cotangent weights: loss = <w_h, h_t> + <w_c, c_t>.
    const Matrix w_h = Matrix::uniform(spec.n, spec.d_h, 1.0, rng);
    const Matrix w_c = is_lstm_kind(kind) ? Matrix::uniform(spec.n, spec.d_h, 1.0, rng)
                                          : Matrix();

    auto loss = [&]() -> double {
        CellCache cache;
        const CellState out = cell_step(params, &lt, x, prev, cache);
        double acc = 0.0;
        auto hd = out.h.data();
        auto wd = w_h.data();
        for (std::size_t i = 0; i < hd.size(); ++i) acc += hd[i] * wd[i];
        if (!w_c.empty()) {
            auto cd = out.c.data();
            auto wc = w_c.data();
            for (std::size_t i = 0; i < cd.size(); ++i) acc += cd[i] * wc[i];
        }
        return acc;
    };

    CellParams grads = cell_zeros(spec);
    CellCache cache;
    cell_step(params, &lt, x, prev, cache);
    CellState d_next;
    d_next.c = w_c;  // cotangent of c_t; empty for non-LSTM kinds
    CellBackward bk = cell_backward(params, &lt, cache, w_h, d_next, grads);

    if (corrupt_analytic) {
        auto refs = grads.tensors();
        auto data = refs.front().tensor->data();
        data[0] += 0.01 * (1.0 + std::fabs(data[0]));
    }

    // Parameters, the input and both incoming states all get checked.
    std::vector<TensorRef> tensors = params.tensors();
    std::vector<ConstTensorRef> analytic;
    for (const ConstTensorRef& r : static_cast<const CellParams&>(grads).tensors()) {
        analytic.push_back(r);
    }
    tensors.push_back({"x", &x});
    analytic.push_back({"x", &bk.d_x});
    tensors.push_back({"h_prev", &prev.h});
    analytic.push_back({"h_prev", &bk.d_prev.h});
    if (is_lstm_kind(kind)) {
        tensors.push_back({"c_prev", &prev.c});
        analytic.push_back({"c_prev", &bk.d_prev.c});
    }
    return finite_difference_max_error(loss, tensors, analytic);
}

}  // namespace gcrn
