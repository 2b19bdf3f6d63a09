#include "gcrn/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "gcrn/checkpoint.hpp"
#include "gcrn/config.hpp"
#include "gcrn/errors.hpp"
#include "gcrn/gradcheck.hpp"
#include "gcrn/graph.hpp"
#include "gcrn/losses.hpp"
#include "gcrn/training.hpp"

namespace gcrn {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Graph build_graph(const RunConfig& cfg) {
    if (cfg.graph_source == "grid") {
        return grid_graph(cfg.grid_rows, cfg.grid_cols, cfg.grid_conn, cfg.sigma,
                          cfg.lambda_mode);
    }
    if (cfg.graph_source == "file") {
        return load_graph(cfg.graph_file, cfg.lambda_mode);
    }
    const Matrix points = load_points(cfg.points_file);
    return knn_graph(points, cfg.knn_k, cfg.metric, cfg.sigma, cfg.lambda_mode);
}

ModelSpec build_model_spec(const RunConfig& cfg, std::size_t n, std::size_t d_x,
                           std::size_t d_out, ReadoutKind readout) {
    ModelSpec spec;
    CellSpec cell;
    cell.kind = cfg.cell_kind;
    cell.n = n;
    cell.d_x = d_x;
    cell.d_h = cfg.d_h;
    cell.k = cfg.k;
    cell.peepholes = cfg.peepholes;
    spec.cells.push_back(cell);
    if (cfg.layers == 2) {
        CellSpec upper = cell;
        upper.d_x = cfg.d_h;
        spec.cells.push_back(upper);
    }
    spec.readout = readout;
    spec.d_out = d_out;
    return spec;
}

std::string sniff_magic(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("cannot open " + path);
    std::string line;
    std::getline(in, line);
    return line;
}

void write_metrics_row(std::ostream& out, const MetricsRow& row) {
    out << row.epoch << "," << row.split << "," << fmt(row.loss) << ",";
    if (row.perplexity) out << fmt(*row.perplexity);
    out << "," << row.wall_ms << "\n";
}

}  // namespace

int cmd_train(const std::string& config_path, const std::string& resume_path) {
    const RunConfig cfg = parse_config_file(config_path);

    const Graph graph = build_graph(cfg);
    const SparseMatrix& lt = graph.scaled_laplacian();

    std::vector<SequenceBatch> train_batches;
    std::vector<SequenceBatch> valid_batches;
    std::size_t d_x = 1;
    std::size_t d_out = 1;
    ReadoutKind readout = ReadoutKind::dense_sigmoid;

    if (cfg.task == "shapes") {
        const SequenceDataset train_data = load_dataset(cfg.data_path);
        if (train_data.n != graph.n()) {
            throw ValueError("train: dataset has " + std::to_string(train_data.n) +
                             " vertices but the graph has " + std::to_string(graph.n()));
        }
        d_x = train_data.d;
        d_out = train_data.d;
        train_batches = make_batches(train_data, cfg.train.batch_size,
                                     cfg.train.unroll_steps, cfg.train.seed);
        if (!cfg.valid_path.empty()) {
            const SequenceDataset valid_data = load_dataset(cfg.valid_path);
            if (valid_data.n != graph.n()) {
                throw ValueError("train: validation dataset vertex count mismatch");
            }
            valid_batches = make_batches(valid_data, cfg.train.batch_size,
                                         cfg.train.unroll_steps, cfg.train.seed + 1);
        } else {
            valid_batches = train_batches;
        }
    } else {
        readout = ReadoutKind::token_softmax;
        const TokenDataset train_data = load_tokens(cfg.data_path);
        if (train_data.vocab != graph.n()) {
            throw ValueError("train: vocabulary " + std::to_string(train_data.vocab) +
                             " does not match graph size " + std::to_string(graph.n()));
        }
        d_out = train_data.vocab;
        train_batches = make_token_batches(train_data, cfg.train.batch_size,
                                           cfg.train.unroll_steps, cfg.train.seed);
        if (!cfg.valid_path.empty()) {
            const TokenDataset valid_data = load_tokens(cfg.valid_path);
            if (valid_data.vocab != graph.n()) {
                throw ValueError("train: validation vocabulary mismatch");
            }
            valid_batches = make_token_batches(valid_data, cfg.train.batch_size,
                                               cfg.train.unroll_steps, cfg.train.seed + 1);
        } else {
            valid_batches = train_batches;
        }
    }

    const ModelSpec spec = build_model_spec(cfg, graph.n(), d_x, d_out, readout);

    Model model;
    OptimizerState opt_state;
    TrainState state;
    bool resuming = false;
    if (!resume_path.empty()) {
        Checkpoint ckpt = checkpoint_load(resume_path);
        if (ckpt.task != cfg.task) {
            throw ValueError("resume: checkpoint task '" + ckpt.task +
                             "' does not match config task '" + cfg.task + "'");
        }
        const Model fresh = model_zeros(spec);
        const auto want = fresh.tensors();
        const auto have = static_cast<const Model&>(ckpt.model).tensors();
        if (want.size() != have.size()) {
            throw ValueError("resume: checkpoint does not match the configured model");
        }
        for (std::size_t i = 0; i < want.size(); ++i) {
            if (want[i].name != have[i].name ||
                !want[i].tensor->same_shape(*have[i].tensor)) {
                throw ValueError("resume: checkpoint tensor '" + have[i].name +
                                 "' does not match the configured model");
            }
        }
        model = std::move(ckpt.model);
        opt_state = std::move(ckpt.opt_state);
        state = ckpt.train_state;
        resuming = true;
    } else {
        model = model_init(spec, cfg.train.seed);
        auto params = model.tensors();
        opt_state = OptimizerState::init(cfg.optim.kind, params);
    }

    fs::create_directories(cfg.out_dir);
    const fs::path metrics_path = fs::path(cfg.out_dir) / "metrics.csv";
    const fs::path best_path = fs::path(cfg.out_dir) / "best.ckpt";
    const fs::path last_path = fs::path(cfg.out_dir) / "last.ckpt";

    std::ofstream metrics;
    if (resuming && fs::exists(metrics_path)) {
        metrics.open(metrics_path, std::ios::app);
    } else {
        metrics.open(metrics_path);
        metrics << "epoch,split,loss,perplexity,wall_ms\n";
    }
    if (!metrics) throw ValueError("train: cannot open " + metrics_path.string());

    auto snapshot = [&](const Model& m, const OptimizerState& opt,
                        const TrainState& st) -> Checkpoint {
        Checkpoint ckpt;
        ckpt.task = cfg.task;
        ckpt.lambda_mode = cfg.lambda_mode;
        ckpt.graph_adjacency = graph.adjacency();
        ckpt.model = m;
        ckpt.opt_kind = cfg.optim.kind;
        ckpt.opt_state = opt;
        ckpt.train_state = st;
        ckpt.seed = cfg.train.seed;
        return ckpt;
    };

    const EpochHook hook = [&](const MetricsRow& train_row, const MetricsRow& valid_row,
                               const Model& m, const OptimizerState& opt,
                               const TrainState& st, bool improved) {
        write_metrics_row(metrics, train_row);
        write_metrics_row(metrics, valid_row);
        metrics.flush();
        checkpoint_save(last_path, snapshot(m, opt, st));
        if (improved) checkpoint_save(best_path, snapshot(m, opt, st));
    };

    train_loop(model, opt_state, state, train_batches, valid_batches, lt, cfg.train,
               cfg.optim, nullptr, hook);
    std::cout << "training complete: best validation loss " << fmt(state.best_valid)
              << "\n";
    return 0;
}

namespace {

struct EvalAccumulator {
    double sum = 0.0;
    std::size_t count = 0;
    void add(double v) {
        sum += v;
        ++count;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

}  // namespace

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             std::size_t rollout) {
    const Checkpoint ckpt = checkpoint_load(checkpoint_path);
    const Graph graph(ckpt.graph_adjacency, ckpt.lambda_mode);
    const SparseMatrix& lt = graph.scaled_laplacian();
    const Model& model = ckpt.model;
    const bool token_task = ckpt.task == "tokens";

    const std::string magic = sniff_magic(data_path);
    if (token_task && magic != "GCRNTOK v1") {
        throw ValueError("eval: checkpoint expects token data, got '" + magic + "'");
    }
    if (!token_task && magic != "GCRNSEQ v1") {
        throw ValueError("eval: checkpoint expects sequence data, got '" + magic + "'");
    }

    // One window per sequence covering its full length.
    std::vector<SequenceBatch> batches;
    if (token_task) {
        const TokenDataset data = load_tokens(data_path);
        if (data.vocab != graph.n()) throw ValueError("eval: vocabulary mismatch");
        if (data.ids.size() < 2) throw ValueError("eval: token stream too short");
        batches = make_token_batches(data, 1, data.ids.size() - 1, 0);
    } else {
        const SequenceDataset data = load_dataset(data_path);
        if (data.n != graph.n()) throw ValueError("eval: vertex count mismatch");
        if (data.sequences.empty() || data.sequences.front().size() < 2) {
            throw ValueError("eval: need sequences with at least 2 frames");
        }
        batches = make_batches(data, 1, data.sequences.front().size() - 1, 0);
    }

    const double loss = evaluate_loss(model, batches, lt);
    std::cout << "loss " << fmt(loss) << "\n";
    if (token_task) std::cout << "perplexity " << fmt(perplexity(loss)) << "\n";

    if (rollout == 0) return 0;

    // Autoregressive tail: teacher-force all but the last `rollout` targets,
    // then feed predictions back as inputs.
    const std::size_t t_len = batches.front().time_steps();
    if (rollout > t_len) {
        throw ValueError("eval: rollout " + std::to_string(rollout) +
                         " exceeds available steps " + std::to_string(t_len));
    }
    std::vector<EvalAccumulator> per_step(rollout);
    for (const SequenceBatch& batch : batches) {
        for (std::size_t b = 0; b < batch.batch_size(); ++b) {
            std::vector<CellState> states;
            for (const CellParams& c : model.cells) states.push_back(initial_state(c.spec));
            Matrix prediction;
            const std::size_t warmup = t_len - rollout;  // teacher-forced steps
            for (std::size_t t = 0; t < t_len; ++t) {
                Matrix x;
                if (t < warmup || t == 0) {
                    x = batch.inputs[t][b];
                } else if (token_task) {
                    // Hard decision: feed the one-hot of the argmax token.
                    std::size_t best = 0;
                    for (std::size_t j = 1; j < prediction.cols(); ++j) {
                        if (prediction(0, j) > prediction(0, best)) best = j;
                    }
                    x = Matrix(graph.n(), 1);
                    x(best, 0) = 1.0;
                } else {
                    x = prediction;
                }
                for (std::size_t l = 0; l < model.cells.size(); ++l) {
                    CellCache cache;
                    states[l] = cell_step(model.cells[l], &lt, x, states[l], cache);
                    x = states[l].h;
                }
                ReadoutCache ro;
                prediction = readout_forward(model, &lt, x, ro);
                if (t + 1 > warmup) {
                    const std::size_t step = t + 1 - warmup;  // 1-based rollout step
                    double step_loss;
                    if (token_task) {
                        const std::size_t target[1] = {batch.token_targets[t][b]};
                        step_loss = softmax_cross_entropy(prediction, target).loss;
                    } else {
                        step_loss =
                            binary_cross_entropy(prediction, batch.dense_targets[t][b])
                                .loss;
                    }
                    per_step[step - 1].add(step_loss);
                }
            }
        }
    }
    for (std::size_t s = 0; s < rollout; ++s) {
        std::cout << "rollout_step " << s + 1 << " loss " << fmt(per_step[s].mean())
                  << "\n";
    }
    return 0;
}

int cmd_gradcheck(const std::string& cell_kind, std::uint64_t seed, std::size_t trials,
                  bool corrupt_analytic) {
    if (trials == 0) {
        std::cerr << "gradcheck: --trials must be >= 1\n";
        return 2;
    }
    const CellKind kind = cell_kind_from_string(cell_kind);
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        worst = std::max(worst, cell_gradcheck_trial(kind, Rng::derive(seed, t),
                                                     corrupt_analytic));
    }
    std::cout << "gradcheck " << cell_kind << " trials " << trials << " max_rel_error "
              << fmt(worst) << "\n";
    return worst <= 1e-5 ? 0 : 1;
}

int cmd_graph_build(const GraphBuildArgs& args) {
    const Matrix points = load_points(args.points_path);
    Metric metric;
    if (args.metric == "euclidean") {
        metric = Metric::euclidean;
    } else if (args.metric == "cosine") {
        metric = Metric::cosine;
    } else {
        throw ValueError("graph build: metric must be euclidean or cosine");
    }
    const Graph g = knn_graph(points, args.k, metric, args.sigma);
    save_graph(args.out_path, g);
    std::cout << "graph n " << g.n() << " m " << g.adjacency().nnz() / 2 << "\n";
    return 0;
}

int cmd_graph_info(const std::string& graph_path) {
    const Graph g = load_graph(graph_path);
    std::size_t deg_min = g.n() ? SIZE_MAX : 0;
    std::size_t deg_max = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < g.n(); ++i) {
        const std::size_t deg = g.adjacency().row_cols(i).size();
        deg_min = std::min(deg_min, deg);
        deg_max = std::max(deg_max, deg);
        total += deg;
    }
    std::cout << "n " << g.n() << "\n";
    std::cout << "m " << g.adjacency().nnz() / 2 << "\n";
    std::cout << "lambda_max " << fmt(g.lambda_max()) << "\n";
    std::cout << "degree_min " << deg_min << "\n";
    std::cout << "degree_mean "
              << fmt(g.n() ? static_cast<double>(total) / static_cast<double>(g.n()) : 0.0)
              << "\n";
    std::cout << "degree_max " << deg_max << "\n";
    return 0;
}

int cmd_gen_shapes(const ShapesConfig& config, const std::string& out_path) {
    const SequenceDataset data = gen_moving_shapes(config);
    save_dataset(out_path, data);
    std::cout << "wrote " << data.sequences.size() << " sequences of "
              << (data.sequences.empty() ? 0 : data.sequences.front().size())
              << " frames (n " << data.n << ") to " << out_path << "\n";
    return 0;
}

}  // namespace gcrn
