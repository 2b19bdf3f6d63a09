#include "gcrn/model.hpp"

#include <cmath>

#include "gcrn/errors.hpp"
#include "gcrn/numeric.hpp"
#include "gcrn/rng.hpp"

namespace gcrn {

const char* to_string(ReadoutKind kind) {
    return kind == ReadoutKind::dense_sigmoid ? "dense_sigmoid" : "token_softmax";
}

ReadoutKind readout_kind_from_string(const std::string& s) {
    if (s == "dense_sigmoid") return ReadoutKind::dense_sigmoid;
    if (s == "token_softmax") return ReadoutKind::token_softmax;
    throw ValueError("unknown readout kind '" + s + "'");
}

void ModelSpec::validate() const {
    if (cells.empty() || cells.size() > 2) {
        throw ValueError("ModelSpec: supports 1 or 2 stacked cells");
    }
    for (const CellSpec& c : cells) c.validate();
    for (std::size_t i = 1; i < cells.size(); ++i) {
        if (cells[i].d_x != cells[i - 1].d_h || cells[i].n != cells[i - 1].n) {
            throw ValueError("ModelSpec: layer " + std::to_string(i) +
                             " does not consume layer " + std::to_string(i - 1) +
                             " output");
        }
    }
    if (d_out < 1) throw ValueError("ModelSpec: d_out must be >= 1");
}

std::vector<TensorRef> Model::tensors() {
    std::vector<TensorRef> out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (TensorRef& r : cells[i].tensors("cell" + std::to_string(i) + ".")) {
            out.push_back(std::move(r));
        }
    }
    if (spec.readout == ReadoutKind::dense_sigmoid) {
        out.push_back({"out.theta.k0", &out_bank.slice(0)});
    } else {
        out.push_back({"out.w", &out_w});
        out.push_back({"out.b", &out_b});
    }
    return out;
}

std::vector<ConstTensorRef> Model::tensors() const {
    auto refs = const_cast<Model*>(this)->tensors();
    std::vector<ConstTensorRef> out;
    out.reserve(refs.size());
    for (const TensorRef& r : refs) out.push_back({r.name, r.tensor});
    return out;
}

std::size_t Model::allocated_count() const {
    std::size_t total = 0;
    for (const ConstTensorRef& r : tensors()) total += r.tensor->size();
    return total;
}

namespace {

Model build_model(const ModelSpec& spec) {
    spec.validate();
    Model m;
    m.spec = spec;
    for (const CellSpec& c : spec.cells) m.cells.push_back(cell_zeros(c));
    const std::size_t d_h = spec.cells.back().d_h;
    if (spec.readout == ReadoutKind::dense_sigmoid) {
        m.out_bank = ChebFilterBank(1, d_h, spec.d_out);
    } else {
        m.out_w = Matrix(d_h, spec.d_out);
        m.out_b = Matrix(1, spec.d_out);
    }
    return m;
}

}  // namespace

Model model_init(const ModelSpec& spec, std::uint64_t seed) {
    Model m = build_model(spec);
    for (std::size_t i = 0; i < spec.cells.size(); ++i) {
        m.cells[i] = cell_init(spec.cells[i], Rng::derive(seed, 0x100 + i));
    }
    Rng rng(Rng::derive(seed, 0x0e7));
    const std::size_t d_h = spec.cells.back().d_h;
    if (spec.readout == ReadoutKind::dense_sigmoid) {
        m.out_bank = ChebFilterBank::glorot(1, d_h, spec.d_out, rng);
    }
    // The token map starts at zero: the sum pool scales with n, so any spread
    // in the initial weights blows the starting logits up with the vertex
    // count. Zero weights make the fresh model exactly the uniform predictor.
    return m;
}

Model model_zeros(const ModelSpec& spec) { return build_model(spec); }

Matrix readout_forward(const Model& model, const SparseMatrix* lt, const Matrix& h_top,
                       ReadoutCache& cache) {
    if (model.spec.readout == ReadoutKind::dense_sigmoid) {
        if (!lt) throw ValueError("readout_forward: dense head needs the Laplacian");
        Matrix y = cheb_forward(*lt, h_top, model.out_bank, &cache.cheb);
        for (double& v : y.data()) v = sigmoid(v);
        cache.pred = y;
        return y;
    }
    cache.h_in = h_top;
    Matrix pooled = column_sums(h_top);  // 1 x d_h
    Matrix logits = matmul(pooled, model.out_w);
    add_row_broadcast(logits, model.out_b);
    return logits;
}

Matrix readout_backward(const Model& model, const SparseMatrix* lt,
                        const ReadoutCache& cache, const Matrix& d_out, Model& grads) {
    if (model.spec.readout == ReadoutKind::dense_sigmoid) {
        if (!lt) throw ValueError("readout_backward: dense head needs the Laplacian");
        Matrix d_pre = d_out;
        auto dd = d_pre.data();
        auto pd = cache.pred.data();
        for (std::size_t i = 0; i < dd.size(); ++i) {
            dd[i] *= pd[i] * (1.0 - pd[i]);
        }
        return cheb_backward(*lt, cache.cheb, model.out_bank, d_pre, grads.out_bank);
    }
    // logits = sum_rows(h) W + b
    Matrix pooled = column_sums(cache.h_in);
    axpy(grads.out_w, 1.0, matmul_tn(pooled, d_out));
    axpy(grads.out_b, 1.0, d_out);
    Matrix d_pooled = matmul_nt(d_out, model.out_w);  // 1 x d_h
    Matrix d_h(cache.h_in.rows(), cache.h_in.cols());
    for (std::size_t i = 0; i < d_h.rows(); ++i) {
        for (std::size_t j = 0; j < d_h.cols(); ++j) {
            d_h(i, j) = d_pooled(0, j);
        }
    }
    return d_h;
}

}  // namespace gcrn
