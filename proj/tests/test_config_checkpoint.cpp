#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gcrn/checkpoint.hpp"
#include "gcrn/config.hpp"
#include "gcrn/errors.hpp"
#include "oracles.hpp"

using namespace gcrn;
using namespace gcrn::test;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig parse_str(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

Model tiny_model(Rng& rng) {
    ModelSpec spec;
    spec.cells.push_back(CellSpec{CellKind::gclstm_m2, 5, 1, 3, 2, PeepholeMode::shared});
    spec.readout = ReadoutKind::dense_sigmoid;
    spec.d_out = 1;
    return model_init(spec, rng.next_u64());
}

}  // namespace

TEST_CASE("config parsing with comments, defaults and round trip") {
    const std::string text =
        "# a comment\n"
        "task = shapes\n"
        "\n"
        "cell.kind = gcgru   # trailing comment\n"
        "cell.d_h = 6\n"
        "graph.grid = 4x5x8\n"
        "data.path = train.seq\n"
        "out.dir = runs/exp1\n";
    const RunConfig cfg = parse_str(text);
    CHECK(cfg.cell_kind == CellKind::gcgru);
    CHECK(cfg.d_h == 6);
    CHECK(cfg.grid_rows == 4);
    CHECK(cfg.grid_cols == 5);
    CHECK(cfg.grid_conn == 8);
    CHECK(cfg.data_path == "train.seq");

    const RunConfig reparsed = parse_str(serialize_config(cfg));
    CHECK(reparsed == cfg);
}

TEST_CASE("config round trip preserves every field") {
    RunConfig cfg;
    cfg.task = "tokens";
    cfg.cell_kind = CellKind::gcrn_m1;
    cfg.d_h = 16;
    cfg.k = 5;
    cfg.peepholes = PeepholeMode::disabled;
    cfg.layers = 2;
    cfg.graph_source = "knn";
    cfg.points_file = "embed.points";
    cfg.knn_k = 4;
    cfg.metric = Metric::cosine;
    cfg.sigma = 0.375;
    cfg.lambda_mode = LambdaMaxMode::upper_bound;
    cfg.optim.kind = OptimizerKind::clipped_sgd;
    cfg.optim.learning_rate = 1.0;
    cfg.optim.max_grad_norm = 5.0;
    cfg.train.unroll_steps = 20;
    cfg.train.batch_size = 20;
    cfg.train.epochs = 13;
    cfg.train.dropout_keep = 0.75;
    cfg.train.seed = 42;
    cfg.data_path = "ptb.tok";
    cfg.valid_path = "ptb_valid.tok";
    cfg.out_dir = "runs/tok";
    const RunConfig reparsed = parse_str(serialize_config(cfg));
    CHECK(reparsed == cfg);
    CHECK(reparsed.sigma.has_value());
    CHECK(*reparsed.sigma == 0.375);
}

TEST_CASE("config parse errors carry line numbers and key names") {
    auto fails_with = [&](const std::string& text, const std::string& needle,
                          std::size_t line) {
        try {
            parse_str(text);
            FAIL("expected ParseError for ", needle);
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
            CHECK(e.line == line);
        }
    };
    fails_with("data.path = x\nnot a kv line\n", "key = value", 2);
    fails_with("wrong.key = 3\ndata.path = x\n", "unknown key", 1);
    fails_with("cell.d_h = many\ndata.path = x\n", "cell.d_h", 1);
    fails_with("data.path = x\ndata.path = y\n", "duplicate", 2);
    fails_with("data.path = x\ngraph.grid = 4x5\n", "16x16x8", 2);

    CHECK_THROWS_AS(parse_str("task = shapes\n"), ValueError);   // missing data.path
    CHECK_THROWS_AS(parse_str("task = what\ndata.path = x\n"), ValueError);
    CHECK_THROWS_AS(parse_config_file("/nonexistent/gcrn.cfg"), ValueError);
}

TEST_CASE("checkpoints round trip byte-identically") {
    const auto dir = std::filesystem::temp_directory_path() / "gcrn_ckpt_test";
    std::filesystem::create_directories(dir);
    Rng rng(3);

    Checkpoint ckpt;
    ckpt.task = "shapes";
    ckpt.lambda_mode = LambdaMaxMode::estimate;
    ckpt.graph_adjacency = random_adjacency(5, 0.4, rng);
    ckpt.model = tiny_model(rng);
    ckpt.opt_kind = OptimizerKind::rmsprop;
    {
        auto params = ckpt.model.tensors();
        ckpt.opt_state = OptimizerState::init(OptimizerKind::rmsprop, params);
        for (Matrix& acc : ckpt.opt_state.acc) {
            for (double& v : acc.data()) v = rng.uniform();
        }
    }
    ckpt.train_state.epoch = 7;
    ckpt.train_state.best_valid = 0.034578901234567891;
    ckpt.train_state.since_improve = 2;
    ckpt.seed = 1234;

    const auto p1 = dir / "a.ckpt";
    const auto p2 = dir / "b.ckpt";
    checkpoint_save(p1, ckpt);
    const Checkpoint loaded = checkpoint_load(p1);
    checkpoint_save(p2, loaded);
    CHECK(slurp(p1) == slurp(p2));

    CHECK(loaded.task == "shapes");
    CHECK(loaded.train_state.epoch == 7);
    CHECK(loaded.train_state.best_valid == ckpt.train_state.best_valid);
    CHECK(loaded.train_state.since_improve == 2);
    CHECK(loaded.seed == 1234);
    CHECK(sparse_equal(loaded.graph_adjacency, ckpt.graph_adjacency));

    const auto ta = static_cast<const Model&>(ckpt.model).tensors();
    const auto tb = static_cast<const Model&>(loaded.model).tensors();
    REQUIRE(ta.size() == tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        CHECK(ta[i].name == tb[i].name);
        CHECK(max_abs_diff(*ta[i].tensor, *tb[i].tensor) == 0.0);
    }
    REQUIRE(loaded.opt_state.acc.size() == ckpt.opt_state.acc.size());
    for (std::size_t i = 0; i < loaded.opt_state.acc.size(); ++i) {
        CHECK(max_abs_diff(loaded.opt_state.acc[i], ckpt.opt_state.acc[i]) == 0.0);
    }
}

TEST_CASE("17 significant digits reproduce doubles exactly") {
    Rng rng(7);
    char buf[64];
    for (int i = 0; i < 10000; ++i) {
        double v = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-20.0, 20.0));
        std::snprintf(buf, sizeof buf, "%.17g", v);
        CHECK(std::stod(buf) == v);
    }
}

TEST_CASE("checkpoint load rejects tampered tensors by name") {
    const auto dir = std::filesystem::temp_directory_path() / "gcrn_ckpt_test";
    std::filesystem::create_directories(dir);
    Rng rng(11);

    Checkpoint ckpt;
    ckpt.graph_adjacency = random_adjacency(5, 0.4, rng);
    ckpt.model = tiny_model(rng);
    ckpt.opt_kind = OptimizerKind::clipped_sgd;
    const auto path = dir / "t.ckpt";
    checkpoint_save(path, ckpt);

    // Rename one tensor in the file; the loader must name the mismatch.
    std::string text = slurp(path);
    const auto pos = text.find("cell0.wx_i.k0");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 13, "cell0.wx_q.k0");
    {
        std::ofstream out(path);
        out << text;
    }
    try {
        checkpoint_load(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("cell0.wx_i.k0") != std::string::npos);
    }
}

TEST_CASE("checkpoint load rejects a shape mismatch") {
    const auto dir = std::filesystem::temp_directory_path() / "gcrn_ckpt_test";
    std::filesystem::create_directories(dir);
    Rng rng(13);

    Checkpoint ckpt;
    ckpt.graph_adjacency = random_adjacency(5, 0.4, rng);
    ckpt.model = tiny_model(rng);
    const auto path = dir / "s.ckpt";
    checkpoint_save(path, ckpt);

    std::string text = slurp(path);
    // d_h 3 -> 4 changes every gate tensor shape expectation.
    const auto pos = text.find("d_h 3");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 5, "d_h 4");
    {
        std::ofstream out(path);
        out << text;
    }
    CHECK_THROWS_AS(checkpoint_load(path), ParseError);
}
