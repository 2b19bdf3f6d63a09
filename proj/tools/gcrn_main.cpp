// gcrn: train and evaluate graph convolutional recurrent networks, build
// graphs from point sets, generate synthetic datasets and run gradient checks.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gcrn/commands.hpp"
#include "gcrn/errors.hpp"

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph convolutional recurrent networks"};
    app.require_subcommand(1);

    // train
    std::string config_path, resume_path;
    CLI::App* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    // eval
    std::string ckpt_path, eval_data;
    std::size_t rollout = 0;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "dataset file")->required();
    eval->add_option("--rollout", rollout, "autoregressive steps at the sequence tail");

    // gradcheck
    std::string cell_kind = "gclstm_m2";
    std::uint64_t gc_seed = 1;
    std::size_t trials = 20;
    bool corrupt = false;
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of a cell's gradients");
    gradcheck->add_option("--cell", cell_kind, "cell kind")->required();
    gradcheck->add_option("--seed", gc_seed, "rng seed");
    gradcheck->add_option("--trials", trials, "number of random trials");
    gradcheck->add_flag("--corrupt-analytic", corrupt,
                        "test hook: falsify the analytic gradient");

    // gen shapes
    gcrn::ShapesConfig shapes;
    std::string gen_out, sprite_kind = "square";
    CLI::App* gen = app.add_subcommand("gen", "generate synthetic data");
    CLI::App* gen_shapes = gen->add_subcommand("shapes", "bouncing-sprite sequences");
    gen_shapes->add_option("--out", gen_out, "output dataset file")->required();
    gen_shapes->add_option("--patch", shapes.patch, "patch side length");
    gen_shapes->add_option("--shapes", shapes.n_shapes, "sprites per sequence");
    gen_shapes->add_option("--kind", sprite_kind, "square | cross | glyph");
    gen_shapes->add_option("--sprite", shapes.sprite_size, "sprite side length");
    gen_shapes->add_option("--min-speed", shapes.min_speed, "velocity magnitude lower bound");
    gen_shapes->add_option("--max-speed", shapes.max_speed, "velocity magnitude upper bound");
    gen_shapes->add_flag("--rotate", shapes.rotate, "spin sprites about their centers");
    gen_shapes->add_option("--seq-len", shapes.seq_len, "frames per sequence");
    gen_shapes->add_option("--count", shapes.count, "number of sequences");
    gen_shapes->add_option("--seed", shapes.seed, "rng seed");

    // graph build | info
    gcrn::GraphBuildArgs build_args;
    double sigma_value = 0.0;
    std::string info_path;
    CLI::App* graph = app.add_subcommand("graph", "graph construction and inspection");
    CLI::App* build = graph->add_subcommand("build", "knn graph from a points file");
    build->add_option("--points", build_args.points_path, "GCRNPTS points file")->required();
    build->add_option("--k", build_args.k, "neighbors per vertex")->required();
    build->add_option("--metric", build_args.metric, "euclidean | cosine");
    CLI::Option* sigma_opt =
        build->add_option("--sigma", sigma_value, "Gaussian kernel width (default auto)");
    build->add_option("--out", build_args.out_path, "output graph file")->required();
    CLI::App* info = graph->add_subcommand("info", "print graph statistics");
    info->add_option("--graph", info_path, "GCRNGRAPH file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (*train) return gcrn::cmd_train(config_path, resume_path);
        if (*eval) return gcrn::cmd_eval(ckpt_path, eval_data, rollout);
        if (*gradcheck) return gcrn::cmd_gradcheck(cell_kind, gc_seed, trials, corrupt);
        if (*gen_shapes) {
            shapes.kind = gcrn::sprite_kind_from_string(sprite_kind);
            return gcrn::cmd_gen_shapes(shapes, gen_out);
        }
        if (*build) {
            if (sigma_opt->count() > 0) build_args.sigma = sigma_value;
            return gcrn::cmd_graph_build(build_args);
        }
        if (*info) return gcrn::cmd_graph_info(info_path);
        std::cerr << "gcrn: no command\n";
        return kExitUsage;
    } catch (const gcrn::NumericError& e) {
        std::cerr << "gcrn: numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const gcrn::ConvergenceError& e) {
        std::cerr << "gcrn: numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const gcrn::Error& e) {
        std::cerr << "gcrn: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "gcrn: " << e.what() << "\n";
        return kExitUsage;
    }
}
