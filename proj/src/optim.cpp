#include "gcrn/optim.hpp"

#include <cmath>

#include "gcrn/errors.hpp"

namespace gcrn {

const char* to_string(OptimizerKind kind) {
    return kind == OptimizerKind::rmsprop ? "rmsprop" : "clipped_sgd";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "rmsprop") return OptimizerKind::rmsprop;
    if (s == "clipped_sgd") return OptimizerKind::clipped_sgd;
    throw ValueError("unknown optimizer kind '" + s + "'");
}

OptimizerState OptimizerState::init(OptimizerKind kind,
                                    const std::vector<TensorRef>& params) {
    OptimizerState st;
    st.kind = kind;
    if (kind == OptimizerKind::rmsprop) {
        st.acc.reserve(params.size());
        for (const TensorRef& p : params) {
            st.acc.emplace_back(p.tensor->rows(), p.tensor->cols());
        }
    }
    return st;
}

namespace {

void check_aligned(const std::vector<TensorRef>& params,
                   const std::vector<TensorRef>& grads) {
    if (params.size() != grads.size()) {
        throw DimensionError("optimizer: parameter/gradient tensor count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].tensor->same_shape(*grads[i].tensor)) {
            throw DimensionError("optimizer: shape mismatch on tensor '" +
                                 params[i].name + "'");
        }
    }
}

}  // namespace

double global_grad_norm(const std::vector<TensorRef>& grads) {
    double acc = 0.0;
    for (const TensorRef& g : grads) {
        for (double x : g.tensor->data()) acc += x * x;
    }
    return std::sqrt(acc);
}

void rmsprop_update(std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                    OptimizerState& state, const OptimizerConfig& cfg) {
    check_aligned(params, grads);
    if (state.acc.size() != params.size()) {
        throw DimensionError("rmsprop_update: state does not mirror parameters");
    }
    const double decay = cfg.decay_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto pd = params[i].tensor->data();
        auto gd = grads[i].tensor->data();
        auto ad = state.acc[i].data();
        for (std::size_t j = 0; j < pd.size(); ++j) {
            ad[j] = decay * ad[j] + (1.0 - decay) * gd[j] * gd[j];
            pd[j] -= cfg.learning_rate * gd[j] / std::sqrt(ad[j] + cfg.epsilon);
        }
    }
}

double sgd_learning_rate(const OptimizerConfig& cfg, std::size_t epoch) {
    const double over = epoch > cfg.sched_start
                            ? static_cast<double>(epoch - cfg.sched_start)
                            : 0.0;
    return cfg.learning_rate * std::pow(0.5, over);
}

void clipped_sgd_update(std::vector<TensorRef>& params, std::vector<TensorRef>& grads,
                        OptimizerState& state, const OptimizerConfig& cfg,
                        std::size_t epoch) {
    (void)state;
    check_aligned(params, grads);
    const double norm = global_grad_norm(grads);
    if (norm > cfg.max_grad_norm) {
        const double scale = cfg.max_grad_norm / norm;
        for (TensorRef& g : grads) {
            for (double& x : g.tensor->data()) x *= scale;
        }
    }
    const double lr = sgd_learning_rate(cfg, epoch);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto pd = params[i].tensor->data();
        auto gd = grads[i].tensor->data();
        for (std::size_t j = 0; j < pd.size(); ++j) {
            pd[j] -= lr * gd[j];
        }
    }
}

void optimizer_update(std::vector<TensorRef>& params, std::vector<TensorRef>& grads,
                      OptimizerState& state, const OptimizerConfig& cfg,
                      std::size_t epoch) {
    if (cfg.kind == OptimizerKind::rmsprop) {
        rmsprop_update(params, grads, state, cfg);
    } else {
        clipped_sgd_update(params, grads, state, cfg, epoch);
    }
}

}  // namespace gcrn
