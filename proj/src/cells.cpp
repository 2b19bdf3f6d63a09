#include "gcrn/cells.hpp"

#include <array>
#include <cmath>

#include "gcrn/errors.hpp"
#include "gcrn/numeric.hpp"

namespace gcrn {

const char* to_string(CellKind kind) {
    switch (kind) {
        case CellKind::fclstm: return "fclstm";
        case CellKind::gcrn_m1: return "gcrn_m1";
        case CellKind::gclstm_m2: return "gclstm_m2";
        case CellKind::gcrnn: return "gcrnn";
        case CellKind::gcgru: return "gcgru";
    }
    return "?";
}

const char* to_string(PeepholeMode mode) {
    switch (mode) {
        case PeepholeMode::disabled: return "disabled";
        case PeepholeMode::shared: return "shared";
        case PeepholeMode::per_vertex: return "per_vertex";
    }
    return "?";
}

CellKind cell_kind_from_string(const std::string& s) {
    if (s == "fclstm") return CellKind::fclstm;
    if (s == "gcrn_m1") return CellKind::gcrn_m1;
    if (s == "gclstm_m2") return CellKind::gclstm_m2;
    if (s == "gcrnn") return CellKind::gcrnn;
    if (s == "gcgru") return CellKind::gcgru;
    throw ValueError("unknown cell kind '" + s + "'");
}

PeepholeMode peephole_mode_from_string(const std::string& s) {
    if (s == "disabled") return PeepholeMode::disabled;
    if (s == "shared") return PeepholeMode::shared;
    if (s == "per_vertex") return PeepholeMode::per_vertex;
    throw ValueError("unknown peephole mode '" + s + "'");
}

bool is_graph_kind(CellKind kind) { return kind != CellKind::fclstm; }

bool is_lstm_kind(CellKind kind) {
    return kind == CellKind::fclstm || kind == CellKind::gcrn_m1 ||
           kind == CellKind::gclstm_m2;
}

void CellSpec::validate() const {
    if (n < 1 || d_x < 1 || d_h < 1) {
        throw ValueError("CellSpec: n, d_x, d_h must all be >= 1");
    }
    if (is_graph_kind(kind) && k < 1) {
        throw ValueError("CellSpec: K must be >= 1 for graph cells");
    }
}

// ---------------------------------------------------------------------------
// GateMap

GateMap GateMap::dense(std::size_t d_in, std::size_t d_out) {
    GateMap m;
    m.cheb_ = false;
    m.dense_ = Matrix(d_in, d_out);
    return m;
}

GateMap GateMap::cheb(std::size_t k, std::size_t d_in, std::size_t d_out) {
    GateMap m;
    m.cheb_ = true;
    m.bank_ = ChebFilterBank(k, d_in, d_out);
    return m;
}

std::size_t GateMap::d_in() const { return cheb_ ? bank_.d_in() : dense_.rows(); }
std::size_t GateMap::d_out() const { return cheb_ ? bank_.d_out() : dense_.cols(); }

std::size_t GateMap::param_count() const {
    return cheb_ ? bank_.param_count() : dense_.size();
}

void GateMap::init_glorot(Rng& rng) {
    if (cheb_) {
        bank_ = ChebFilterBank::glorot(bank_.order(), bank_.d_in(), bank_.d_out(), rng);
    } else {
        const double a = std::sqrt(6.0 / static_cast<double>(dense_.rows() + dense_.cols()));
        dense_ = Matrix::uniform(dense_.rows(), dense_.cols(), a, rng);
    }
}

Matrix GateMap::forward(const SparseMatrix* lt, const Matrix& x, Cache& cache) const {
    if (cheb_) {
        if (!lt) throw ValueError("GateMap: graph-convolutional map needs a Laplacian");
        return cheb_forward(*lt, x, bank_, &cache.cheb);
    }
    cache.input = x;
    return matmul(x, dense_);
}

Matrix GateMap::backward(const SparseMatrix* lt, const Cache& cache, const Matrix& d_y,
                         GateMap& grad) const {
    if (grad.cheb_ != cheb_) throw ValueError("GateMap: gradient accumulator kind mismatch");
    if (cheb_) {
        if (!lt) throw ValueError("GateMap: graph-convolutional map needs a Laplacian");
        return cheb_backward(*lt, cache.cheb, bank_, d_y, grad.bank_);
    }
    axpy(grad.dense_, 1.0, matmul_tn(cache.input, d_y));
    return matmul_nt(d_y, dense_);
}

// ---------------------------------------------------------------------------
// Parameter layout

namespace {

std::size_t gate_count(CellKind kind) {
    if (is_lstm_kind(kind)) return 4;
    return kind == CellKind::gcgru ? 3 : 1;
}

const char* gate_name(CellKind kind, std::size_t g) {
    static const char* lstm[] = {"i", "f", "c", "o"};
    static const char* gru[] = {"z", "r", "h"};
    if (is_lstm_kind(kind)) return lstm[g];
    return kind == CellKind::gcgru ? gru[g] : "h";
}

bool gates_use_cheb(CellKind kind) {
    // Model 1 keeps fully-connected gates; the convolution sits in its
    // feature stage.
    return kind == CellKind::gclstm_m2 || kind == CellKind::gcrnn ||
           kind == CellKind::gcgru;
}

GateMap make_gate_map(const CellSpec& spec, std::size_t d_in, std::size_t d_out) {
    return gates_use_cheb(spec.kind) ? GateMap::cheb(spec.k, d_in, d_out)
                                     : GateMap::dense(d_in, d_out);
}

CellParams build_params(const CellSpec& spec) {
    spec.validate();
    CellParams p;
    p.spec = spec;
    if (spec.kind == CellKind::gcrn_m1) {
        p.feature = GateMap::cheb(spec.k, spec.d_x, spec.d_x);
    }
    const std::size_t gates = gate_count(spec.kind);
    for (std::size_t g = 0; g < gates; ++g) {
        p.w_x.push_back(make_gate_map(spec, spec.d_x, spec.d_h));
        p.w_h.push_back(make_gate_map(spec, spec.d_h, spec.d_h));
        p.biases.emplace_back(1, spec.d_h);
    }
    if (is_lstm_kind(spec.kind) && spec.peepholes != PeepholeMode::disabled) {
        const std::size_t rows = spec.peepholes == PeepholeMode::per_vertex ? spec.n : 1;
        p.peep.assign(3, Matrix(rows, spec.d_h));
    }
    return p;
}

void collect_map(std::vector<TensorRef>& out, const std::string& name, GateMap& map) {
    if (map.is_cheb()) {
        for (std::size_t k = 0; k < map.bank().order(); ++k) {
            out.push_back({name + ".k" + std::to_string(k), &map.bank().slice(k)});
        }
    } else {
        out.push_back({name, &map.dense_weight()});
    }
}

}  // namespace

std::vector<TensorRef> CellParams::tensors(const std::string& prefix) {
    std::vector<TensorRef> out;
    if (spec.kind == CellKind::gcrn_m1) {
        collect_map(out, prefix + "cnn", feature);
    }
    for (std::size_t g = 0; g < w_x.size(); ++g) {
        collect_map(out, prefix + "wx_" + gate_name(spec.kind, g), w_x[g]);
        collect_map(out, prefix + "wh_" + gate_name(spec.kind, g), w_h[g]);
    }
    static const char* peep_names[] = {"p_i", "p_f", "p_o"};
    for (std::size_t i = 0; i < peep.size(); ++i) {
        out.push_back({prefix + peep_names[i], &peep[i]});
    }
    for (std::size_t g = 0; g < biases.size(); ++g) {
        out.push_back({prefix + "b_" + gate_name(spec.kind, g), &biases[g]});
    }
    return out;
}

std::vector<ConstTensorRef> CellParams::tensors(const std::string& prefix) const {
    auto refs = const_cast<CellParams*>(this)->tensors(prefix);
    std::vector<ConstTensorRef> out;
    out.reserve(refs.size());
    for (const TensorRef& r : refs) out.push_back({r.name, r.tensor});
    return out;
}

std::size_t CellParams::allocated_count() const {
    std::size_t total = 0;
    for (const ConstTensorRef& r : tensors()) total += r.tensor->size();
    return total;
}

CellParams cell_init(const CellSpec& spec, std::uint64_t seed) {
    CellParams p = build_params(spec);
    Rng rng(Rng::derive(seed, 0xce11));

    if (spec.kind == CellKind::gcrn_m1) p.feature.init_glorot(rng);
    for (std::size_t g = 0; g < p.w_x.size(); ++g) {
        p.w_x[g].init_glorot(rng);
        p.w_h[g].init_glorot(rng);
    }
    const double peep_a = std::sqrt(3.0 / static_cast<double>(spec.d_h));
    for (Matrix& m : p.peep) {
        m = Matrix::uniform(m.rows(), m.cols(), peep_a, rng);
    }

    // Gates start open: i, f, o (and the GRU's z, r) biased to one.
    if (is_lstm_kind(spec.kind)) {
        p.biases[0] = Matrix::filled(1, spec.d_h, 1.0);  // i
        p.biases[1] = Matrix::filled(1, spec.d_h, 1.0);  // f
        p.biases[3] = Matrix::filled(1, spec.d_h, 1.0);  // o
    } else if (spec.kind == CellKind::gcgru) {
        p.biases[0] = Matrix::filled(1, spec.d_h, 1.0);  // z
        p.biases[1] = Matrix::filled(1, spec.d_h, 1.0);  // r
    }
    return p;
}

CellParams cell_zeros(const CellSpec& spec) { return build_params(spec); }

std::size_t param_count(const CellSpec& spec) {
    spec.validate();
    const std::size_t gates = gate_count(spec.kind);
    const std::size_t per_gate = spec.d_h * (spec.d_x + spec.d_h);
    std::size_t count = gates * per_gate * (gates_use_cheb(spec.kind) ? spec.k : 1);
    count += gates * spec.d_h;  // biases
    if (spec.kind == CellKind::gcrn_m1) count += spec.k * spec.d_x * spec.d_x;
    if (is_lstm_kind(spec.kind)) {
        switch (spec.peepholes) {
            case PeepholeMode::disabled: break;
            case PeepholeMode::shared: count += 3 * spec.d_h; break;
            case PeepholeMode::per_vertex: count += 3 * spec.n * spec.d_h; break;
        }
    }
    return count;
}

CellState initial_state(const CellSpec& spec) {
    CellState s;
    s.h = Matrix(spec.n, spec.d_h);
    if (is_lstm_kind(spec.kind)) s.c = Matrix(spec.n, spec.d_h);
    return s;
}

// ---------------------------------------------------------------------------
// Step arithmetic

namespace {

Matrix sigmoid_mat(const Matrix& a) {
    Matrix out = a;
    for (double& x : out.data()) x = sigmoid(x);
    return out;
}

Matrix tanh_mat(const Matrix& a) {
    Matrix out = a;
    for (double& x : out.data()) x = std::tanh(x);
    return out;
}

void add_peephole(Matrix& pre, const Matrix& p, const Matrix& c, PeepholeMode mode) {
    if (mode == PeepholeMode::per_vertex) {
        auto pd = pre.data();
        auto pp = p.data();
        auto cd = c.data();
        for (std::size_t i = 0; i < pd.size(); ++i) pd[i] += pp[i] * cd[i];
    } else {
        for (std::size_t i = 0; i < pre.rows(); ++i) {
            for (std::size_t j = 0; j < pre.cols(); ++j) {
                pre(i, j) += p(0, j) * c(i, j);
            }
        }
    }
}

/// dc += d_pre * p, the state-side pullback of a peephole term.
void peephole_pullback(Matrix& dc, const Matrix& d_pre, const Matrix& p,
                       PeepholeMode mode) {
    if (mode == PeepholeMode::per_vertex) {
        auto dcd = dc.data();
        auto dd = d_pre.data();
        auto pp = p.data();
        for (std::size_t i = 0; i < dcd.size(); ++i) dcd[i] += dd[i] * pp[i];
    } else {
        for (std::size_t i = 0; i < dc.rows(); ++i) {
            for (std::size_t j = 0; j < dc.cols(); ++j) {
                dc(i, j) += d_pre(i, j) * p(0, j);
            }
        }
    }
}

/// dp += d_pre * c, column-summed in the shared mode.
void peephole_grad(Matrix& dp, const Matrix& d_pre, const Matrix& c, PeepholeMode mode) {
    if (mode == PeepholeMode::per_vertex) {
        auto dpd = dp.data();
        auto dd = d_pre.data();
        auto cd = c.data();
        for (std::size_t i = 0; i < dpd.size(); ++i) dpd[i] += dd[i] * cd[i];
    } else {
        for (std::size_t i = 0; i < d_pre.rows(); ++i) {
            for (std::size_t j = 0; j < d_pre.cols(); ++j) {
                dp(0, j) += d_pre(i, j) * c(i, j);
            }
        }
    }
}

void check_step_shapes(const CellParams& params, const Matrix& x, const CellState& prev) {
    const CellSpec& s = params.spec;
    if (x.rows() != s.n || x.cols() != s.d_x) {
        throw DimensionError("cell_step: input must be " + std::to_string(s.n) + "x" +
                             std::to_string(s.d_x) + ", got " + std::to_string(x.rows()) +
                             "x" + std::to_string(x.cols()));
    }
    if (prev.h.rows() != s.n || prev.h.cols() != s.d_h) {
        throw DimensionError("cell_step: hidden state must be " + std::to_string(s.n) +
                             "x" + std::to_string(s.d_h));
    }
    if (is_lstm_kind(s.kind) && (prev.c.rows() != s.n || prev.c.cols() != s.d_h)) {
        throw DimensionError("cell_step: cell state must be " + std::to_string(s.n) +
                             "x" + std::to_string(s.d_h));
    }
}

/// Shared LSTM arithmetic; `input` is x_t for fclstm/gclstm_m2 and the
/// feature-stage output for gcrn_m1. gate_lt is null for dense gate maps.
CellState lstm_forward(const CellParams& params, const SparseMatrix* gate_lt,
                       const Matrix& input, const CellState& prev, CellCache& cache) {
    const PeepholeMode mode = params.spec.peepholes;
    const bool peeps = !params.peep.empty();

    cache.x_caches.resize(4);
    cache.h_caches.resize(4);
    std::array<Matrix, 4> pre;
    for (std::size_t g = 0; g < 4; ++g) {
        pre[g] = params.w_x[g].forward(gate_lt, input, cache.x_caches[g]);
        axpy(pre[g], 1.0, params.w_h[g].forward(gate_lt, prev.h, cache.h_caches[g]));
        add_row_broadcast(pre[g], params.biases[g]);
    }
    if (peeps) {
        add_peephole(pre[0], params.peep[0], prev.c, mode);
        add_peephole(pre[1], params.peep[1], prev.c, mode);
    }

    cache.gate_i = sigmoid_mat(pre[0]);
    cache.gate_f = sigmoid_mat(pre[1]);
    cache.gate_g = tanh_mat(pre[2]);
    cache.c_new = hadamard(cache.gate_f, prev.c) + hadamard(cache.gate_i, cache.gate_g);
    if (peeps) add_peephole(pre[3], params.peep[2], cache.c_new, mode);
    cache.gate_o = sigmoid_mat(pre[3]);
    cache.tanh_c = tanh_mat(cache.c_new);

    CellState out;
    out.h = hadamard(cache.gate_o, cache.tanh_c);
    out.c = cache.c_new;
    return out;
}

/// Shared LSTM adjoint. Returns the cotangent of `input`.
Matrix lstm_backward(const CellParams& params, const SparseMatrix* gate_lt,
                     const CellCache& cache, const Matrix& dh, const Matrix& dc_next,
                     CellParams& grads, CellState& d_prev) {
    const PeepholeMode mode = params.spec.peepholes;
    const bool peeps = !params.peep.empty();
    const std::size_t count = dh.size();

    const Matrix& gi = cache.gate_i;
    const Matrix& gf = cache.gate_f;
    const Matrix& gg = cache.gate_g;
    const Matrix& go = cache.gate_o;

    Matrix do_pre(dh.rows(), dh.cols());
    Matrix dc(dh.rows(), dh.cols());
    {
        auto dhd = dh.data();
        auto tc = cache.tanh_c.data();
        auto od = go.data();
        auto dod = do_pre.data();
        auto dcd = dc.data();
        auto dcn = dc_next.data();
        for (std::size_t i = 0; i < count; ++i) {
            dod[i] = dhd[i] * tc[i] * od[i] * (1.0 - od[i]);
            dcd[i] = dhd[i] * od[i] * (1.0 - tc[i] * tc[i]) + dcn[i];
        }
    }
    if (peeps) peephole_pullback(dc, do_pre, params.peep[2], mode);

    Matrix di_pre(dh.rows(), dh.cols());
    Matrix df_pre(dh.rows(), dh.cols());
    Matrix dg_pre(dh.rows(), dh.cols());
    {
        auto dcd = dc.data();
        auto id = gi.data();
        auto fd = gf.data();
        auto gd = gg.data();
        auto cp = cache.c_prev.data();
        auto dip = di_pre.data();
        auto dfp = df_pre.data();
        auto dgp = dg_pre.data();
        for (std::size_t i = 0; i < count; ++i) {
            dip[i] = dcd[i] * gd[i] * id[i] * (1.0 - id[i]);
            dfp[i] = dcd[i] * cp[i] * fd[i] * (1.0 - fd[i]);
            dgp[i] = dcd[i] * id[i] * (1.0 - gd[i] * gd[i]);
        }
    }

    d_prev.c = hadamard(dc, gf);
    if (peeps) {
        peephole_pullback(d_prev.c, di_pre, params.peep[0], mode);
        peephole_pullback(d_prev.c, df_pre, params.peep[1], mode);
        peephole_grad(grads.peep[0], di_pre, cache.c_prev, mode);
        peephole_grad(grads.peep[1], df_pre, cache.c_prev, mode);
        peephole_grad(grads.peep[2], do_pre, cache.c_new, mode);
    }

    const std::array<const Matrix*, 4> d_pres = {&di_pre, &df_pre, &dg_pre, &do_pre};
    Matrix d_input(dh.rows(), params.w_x[0].d_in());
    d_prev.h = Matrix(dh.rows(), dh.cols());
    for (std::size_t g = 0; g < 4; ++g) {
        axpy(grads.biases[g], 1.0, column_sums(*d_pres[g]));
        axpy(d_input, 1.0,
             params.w_x[g].backward(gate_lt, cache.x_caches[g], *d_pres[g], grads.w_x[g]));
        axpy(d_prev.h, 1.0,
             params.w_h[g].backward(gate_lt, cache.h_caches[g], *d_pres[g], grads.w_h[g]));
    }
    return d_input;
}

}  // namespace

CellState cell_step(const CellParams& params, const SparseMatrix* lt, const Matrix& x,
                    const CellState& prev, CellCache& cache) {
    check_step_shapes(params, x, prev);
    const CellKind kind = params.spec.kind;
    if (is_graph_kind(kind) && !lt) {
        throw ValueError("cell_step: graph cell needs a scaled Laplacian");
    }
    cache = CellCache{};
    cache.kind = kind;
    cache.h_prev = prev.h;
    cache.c_prev = prev.c;

    switch (kind) {
        case CellKind::fclstm:
            return lstm_forward(params, nullptr, x, prev, cache);
        case CellKind::gcrn_m1: {
            cache.x_cnn = params.feature.forward(lt, x, cache.feature_cache);
            return lstm_forward(params, nullptr, cache.x_cnn, prev, cache);
        }
        case CellKind::gclstm_m2:
            return lstm_forward(params, lt, x, prev, cache);
        case CellKind::gcrnn: {
            cache.x_caches.resize(1);
            cache.h_caches.resize(1);
            Matrix pre = params.w_x[0].forward(lt, x, cache.x_caches[0]);
            axpy(pre, 1.0, params.w_h[0].forward(lt, prev.h, cache.h_caches[0]));
            add_row_broadcast(pre, params.biases[0]);
            cache.h_new = tanh_mat(pre);
            CellState out;
            out.h = cache.h_new;
            return out;
        }
        case CellKind::gcgru: {
            cache.x_caches.resize(3);
            cache.h_caches.resize(3);
            Matrix pre_z = params.w_x[0].forward(lt, x, cache.x_caches[0]);
            axpy(pre_z, 1.0, params.w_h[0].forward(lt, prev.h, cache.h_caches[0]));
            add_row_broadcast(pre_z, params.biases[0]);
            cache.gate_z = sigmoid_mat(pre_z);

            Matrix pre_r = params.w_x[1].forward(lt, x, cache.x_caches[1]);
            axpy(pre_r, 1.0, params.w_h[1].forward(lt, prev.h, cache.h_caches[1]));
            add_row_broadcast(pre_r, params.biases[1]);
            cache.gate_r = sigmoid_mat(pre_r);

            cache.reset_h = hadamard(cache.gate_r, prev.h);
            Matrix pre_h = params.w_x[2].forward(lt, x, cache.x_caches[2]);
            axpy(pre_h, 1.0, params.w_h[2].forward(lt, cache.reset_h, cache.h_caches[2]));
            add_row_broadcast(pre_h, params.biases[2]);
            cache.h_bar = tanh_mat(pre_h);

            CellState out;
            out.h = Matrix(prev.h.rows(), prev.h.cols());
            auto zd = cache.gate_z.data();
            auto hp = prev.h.data();
            auto hb = cache.h_bar.data();
            auto ho = out.h.data();
            for (std::size_t i = 0; i < ho.size(); ++i) {
                ho[i] = zd[i] * hp[i] + (1.0 - zd[i]) * hb[i];
            }
            return out;
        }
    }
    throw ValueError("cell_step: unknown cell kind");
}

CellBackward cell_backward(const CellParams& params, const SparseMatrix* lt,
                           const CellCache& cache, const Matrix& d_h,
                           const CellState& d_next, CellParams& grads) {
    if (cache.kind != params.spec.kind) {
        throw ValueError("cell_backward: cache was produced by a different cell kind");
    }
    if (grads.spec.kind != params.spec.kind) {
        throw ValueError("cell_backward: gradient accumulator kind mismatch");
    }
    const CellSpec& s = params.spec;

    Matrix dh(s.n, s.d_h);
    if (!d_h.empty()) {
        if (d_h.rows() != s.n || d_h.cols() != s.d_h) {
            throw DimensionError("cell_backward: d_h shape mismatch");
        }
        axpy(dh, 1.0, d_h);
    }
    if (!d_next.h.empty()) axpy(dh, 1.0, d_next.h);

    CellBackward out;
    switch (s.kind) {
        case CellKind::fclstm:
        case CellKind::gcrn_m1:
        case CellKind::gclstm_m2: {
            Matrix dc_next(s.n, s.d_h);
            if (!d_next.c.empty()) axpy(dc_next, 1.0, d_next.c);
            const SparseMatrix* gate_lt = s.kind == CellKind::gclstm_m2 ? lt : nullptr;
            Matrix d_input =
                lstm_backward(params, gate_lt, cache, dh, dc_next, grads, out.d_prev);
            if (s.kind == CellKind::gcrn_m1) {
                out.d_x = params.feature.backward(lt, cache.feature_cache, d_input,
                                                  grads.feature);
            } else {
                out.d_x = std::move(d_input);
            }
            return out;
        }
        case CellKind::gcrnn: {
            Matrix d_pre = dh;
            auto dp = d_pre.data();
            auto hn = cache.h_new.data();
            for (std::size_t i = 0; i < dp.size(); ++i) {
                dp[i] *= 1.0 - hn[i] * hn[i];
            }
            axpy(grads.biases[0], 1.0, column_sums(d_pre));
            out.d_x = params.w_x[0].backward(lt, cache.x_caches[0], d_pre, grads.w_x[0]);
            out.d_prev.h =
                params.w_h[0].backward(lt, cache.h_caches[0], d_pre, grads.w_h[0]);
            return out;
        }
        case CellKind::gcgru: {
            const Matrix& z = cache.gate_z;
            const Matrix& r = cache.gate_r;
            const Matrix& hb = cache.h_bar;
            const Matrix& hp = cache.h_prev;

            Matrix dz_pre(s.n, s.d_h);
            Matrix dhb_pre(s.n, s.d_h);
            {
                auto dhd = dh.data();
                auto zd = z.data();
                auto hbd = hb.data();
                auto hpd = hp.data();
                auto dzp = dz_pre.data();
                auto dbp = dhb_pre.data();
                for (std::size_t i = 0; i < dhd.size(); ++i) {
                    dzp[i] = dhd[i] * (hpd[i] - hbd[i]) * zd[i] * (1.0 - zd[i]);
                    dbp[i] = dhd[i] * (1.0 - zd[i]) * (1.0 - hbd[i] * hbd[i]);
                }
            }

            Matrix du =
                params.w_h[2].backward(lt, cache.h_caches[2], dhb_pre, grads.w_h[2]);

            Matrix dr_pre(s.n, s.d_h);
            out.d_prev.h = Matrix(s.n, s.d_h);
            {
                auto dud = du.data();
                auto hpd = hp.data();
                auto rd = r.data();
                auto zd = z.data();
                auto dhd = dh.data();
                auto drp = dr_pre.data();
                auto dph = out.d_prev.h.data();
                for (std::size_t i = 0; i < dud.size(); ++i) {
                    drp[i] = dud[i] * hpd[i] * rd[i] * (1.0 - rd[i]);
                    dph[i] = dhd[i] * zd[i] + dud[i] * rd[i];
                }
            }
            axpy(out.d_prev.h, 1.0,
                 params.w_h[0].backward(lt, cache.h_caches[0], dz_pre, grads.w_h[0]));
            axpy(out.d_prev.h, 1.0,
                 params.w_h[1].backward(lt, cache.h_caches[1], dr_pre, grads.w_h[1]));

            out.d_x = params.w_x[0].backward(lt, cache.x_caches[0], dz_pre, grads.w_x[0]);
            axpy(out.d_x, 1.0,
                 params.w_x[1].backward(lt, cache.x_caches[1], dr_pre, grads.w_x[1]));
            axpy(out.d_x, 1.0,
                 params.w_x[2].backward(lt, cache.x_caches[2], dhb_pre, grads.w_x[2]));

            axpy(grads.biases[0], 1.0, column_sums(dz_pre));
            axpy(grads.biases[1], 1.0, column_sums(dr_pre));
            axpy(grads.biases[2], 1.0, column_sums(dhb_pre));
            return out;
        }
    }
    throw ValueError("cell_backward: unknown cell kind");
}

}  // namespace gcrn
