#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gcrn/data.hpp"
#include "gcrn/errors.hpp"
#include "oracles.hpp"

using namespace gcrn;
using namespace gcrn::test;

namespace {

double frame_sum(const Matrix& f) {
    double acc = 0.0;
    for (double v : f.data()) acc += v;
    return acc;
}

std::pair<std::size_t, std::size_t> argmax_cell(const Matrix& f) {
    std::size_t br = 0, bc = 0;
    for (std::size_t r = 0; r < f.rows(); ++r) {
        for (std::size_t c = 0; c < f.cols(); ++c) {
            if (f(r, c) > f(br, bc)) {
                br = r;
                bc = c;
            }
        }
    }
    return {br, bc};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("sprite bitmaps") {
    const Matrix sq = make_sprite_bitmap(SpriteKind::square, 3);
    CHECK(frame_sum(sq) == 9.0);
    const Matrix cr = make_sprite_bitmap(SpriteKind::cross, 5);
    CHECK(frame_sum(cr) == 9.0);  // one row + one column minus the shared center
    const Matrix gl = make_sprite_bitmap(SpriteKind::glyph, 5);
    CHECK(frame_sum(gl) > 0.0);
    CHECK(gl(0, 4) == 0.0);  // asymmetric corner
}

TEST_CASE("a 2x2 square at velocity (1,0) reaches the right wall at frame 6") {
    Sprite s;
    s.bitmap = make_sprite_bitmap(SpriteKind::square, 2);
    s.v_col = 1.0;
    const auto frames = render_moving_sequence(8, {s}, 9);
    // Top-left corner of the box at frame t.
    for (std::size_t t = 0; t <= 6; ++t) {
        CHECK(frames[t](0, t) == 1.0);
        CHECK(frame_sum(frames[t]) == 4.0);
    }
    CHECK(frames[6](0, 6) == 1.0);
    CHECK(frames[6](0, 7) == 1.0);   // box [6,8) touches the wall
    CHECK(frames[7](0, 5) == 1.0);   // reversed
    CHECK(frames[7](0, 7) == 0.0);
    CHECK(frames[8](0, 4) == 1.0);
}

TEST_CASE("zero velocity and no rotation freezes the sequence") {
    Sprite s;
    s.bitmap = make_sprite_bitmap(SpriteKind::cross, 3);
    s.row = 1.5;
    s.col = 2.25;
    const auto frames = render_moving_sequence(8, {s}, 5);
    for (std::size_t t = 1; t < 5; ++t) {
        CHECK(max_abs_diff(frames[t], frames[0]) == 0.0);
    }
}

TEST_CASE("integer-velocity motion conserves mass and stays in range") {
    Sprite s;
    s.bitmap = make_sprite_bitmap(SpriteKind::glyph, 4);
    s.row = 1.0;
    s.col = 2.0;
    s.v_row = 1.0;
    s.v_col = -1.0;
    const auto frames = render_moving_sequence(12, {s}, 30);
    const double mass = frame_sum(frames[0]);
    for (const Matrix& f : frames) {
        CHECK(frame_sum(f) == mass);
        for (double v : f.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("rotating sprites stay in range and keep their support inside the patch") {
    Sprite s;
    s.bitmap = make_sprite_bitmap(SpriteKind::glyph, 5);
    s.omega = 0.3;
    s.v_row = 0.7;
    s.v_col = 0.4;
    const auto frames = render_moving_sequence(12, {s}, 40);
    for (const Matrix& f : frames) {
        CHECK(frame_sum(f) > 0.0);
        for (double v : f.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("generator is deterministic and validates its config") {
    ShapesConfig cfg;
    cfg.patch = 8;
    cfg.sprite_size = 3;
    cfg.n_shapes = 2;
    cfg.seq_len = 5;
    cfg.count = 4;
    cfg.rotate = true;
    cfg.seed = 77;
    const SequenceDataset a = gen_moving_shapes(cfg);
    const SequenceDataset b = gen_moving_shapes(cfg);
    REQUIRE(a.sequences.size() == 4);
    bool identical = true;
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t t = 0; t < 5; ++t) {
            if (max_abs_diff(a.sequences[s][t], b.sequences[s][t]) != 0.0) {
                identical = false;
            }
        }
    }
    CHECK(identical);

    cfg.seed = 78;
    const SequenceDataset c = gen_moving_shapes(cfg);
    CHECK(max_abs_diff(a.sequences[0][1], c.sequences[0][1]) > 0.0);

    ShapesConfig bad = cfg;
    bad.sprite_size = 10;  // larger than the patch
    CHECK_THROWS_AS(gen_moving_shapes(bad), ValueError);
    ShapesConfig still = cfg;
    still.min_speed = 0.0;
    CHECK_THROWS_AS(gen_moving_shapes(still), ValueError);
}

TEST_CASE("token signals are one-hot") {
    const std::size_t ids[1] = {0};
    const auto frames = tokens_to_signals(ids, 3);
    REQUIRE(frames.size() == 1);
    CHECK(frames[0](0, 0) == 1.0);
    CHECK(frames[0](1, 0) == 0.0);
    CHECK(frames[0](2, 0) == 0.0);

    Rng rng(5);
    std::vector<std::size_t> stream;
    for (int i = 0; i < 40; ++i) stream.push_back(rng.below(7));
    const auto sig = tokens_to_signals(stream, 7);
    for (std::size_t t = 0; t < stream.size(); ++t) {
        CHECK(frame_sum(sig[t]) == 1.0);
        CHECK(argmax_cell(sig[t]).first == stream[t]);
    }

    const std::size_t bad[1] = {9};
    CHECK_THROWS_AS(tokens_to_signals(bad, 3), ValueError);
}

TEST_CASE("windowing arithmetic and partitioning") {
    Rng rng(7);
    SequenceDataset data;
    data.n = 4;
    data.d = 1;
    for (int s = 0; s < 40; ++s) {
        std::vector<Matrix> seq;
        for (int t = 0; t < 21; ++t) seq.push_back(random_matrix(4, 1, rng));
        data.sequences.push_back(std::move(seq));
    }

    const auto batches = make_batches(data, 20, 20, 5);
    REQUIRE(batches.size() == 2);  // 40 windows / batch 20
    CHECK(batches[0].batch_size() == 20);
    CHECK(batches[1].batch_size() == 20);
    CHECK(batches[0].time_steps() == 20);

    // Same seed, same order; different seed shuffles.
    const auto again = make_batches(data, 20, 20, 5);
    CHECK(max_abs_diff(batches[0].inputs[0][0], again.front().inputs[0][0]) == 0.0);

    // Targets are the inputs shifted by one step.
    const auto single = make_batches(data, 1, 20, 9);
    REQUIRE(single.size() == 40);
    for (std::size_t t = 0; t + 1 < 20; ++t) {
        CHECK(max_abs_diff(single[0].dense_targets[t][0], single[0].inputs[t + 1][0]) ==
              0.0);
    }

    // Too-short sequences are rejected.
    SequenceDataset tiny;
    tiny.n = 4;
    tiny.d = 1;
    tiny.sequences.push_back({random_matrix(4, 1, rng)});
    CHECK_THROWS_AS(make_batches(tiny, 1, 20, 0), ValueError);
}

TEST_CASE("longer sequences yield multiple non-overlapping windows") {
    Rng rng(9);
    SequenceDataset data;
    data.n = 2;
    data.d = 1;
    std::vector<Matrix> seq;
    for (int t = 0; t < 41; ++t) {
        seq.push_back(Matrix::filled(2, 1, static_cast<double>(t)));
    }
    data.sequences.push_back(std::move(seq));

    const auto batches = make_batches(data, 1, 20, 11);
    REQUIRE(batches.size() == 2);  // starts 0 and 20; the tail frame 40 is the target
    std::vector<double> starts = {batches[0].inputs[0][0](0, 0),
                                  batches[1].inputs[0][0](0, 0)};
    std::sort(starts.begin(), starts.end());
    CHECK(starts[0] == 0.0);
    CHECK(starts[1] == 20.0);
}

TEST_CASE("token batching windows the stream") {
    TokenDataset data;
    data.vocab = 5;
    for (int i = 0; i < 41; ++i) data.ids.push_back(i % 5);
    const auto batches = make_token_batches(data, 2, 20, 3);
    REQUIRE(batches.size() == 1);
    CHECK(batches[0].batch_size() == 2);
    CHECK(batches[0].has_tokens());
    // Target of step t is the id at stream position start + t + 1.
    for (std::size_t t = 0; t + 1 < 20; ++t) {
        const auto next_onehot = argmax_cell(batches[0].inputs[t + 1][0]).first;
        CHECK(batches[0].token_targets[t][0] == next_onehot);
    }
}

TEST_CASE("dataset files round trip byte-identically") {
    const auto dir = std::filesystem::temp_directory_path() / "gcrn_data_test";
    std::filesystem::create_directories(dir);

    ShapesConfig cfg;
    cfg.patch = 4;
    cfg.sprite_size = 2;
    cfg.n_shapes = 1;
    cfg.seq_len = 3;
    cfg.count = 2;
    cfg.seed = 13;
    const SequenceDataset data = gen_moving_shapes(cfg);

    const auto p1 = dir / "a.seq";
    const auto p2 = dir / "b.seq";
    save_dataset(p1, data);
    const SequenceDataset loaded = load_dataset(p1);
    save_dataset(p2, loaded);
    CHECK(slurp(p1) == slurp(p2));
    REQUIRE(loaded.sequences.size() == 2);
    CHECK(max_abs_diff(loaded.sequences[1][2], data.sequences[1][2]) == 0.0);

    // Empty dataset is a valid file.
    SequenceDataset empty;
    empty.n = 0;
    empty.d = 0;
    const auto pe = dir / "empty.seq";
    save_dataset(pe, empty);
    CHECK(load_dataset(pe).sequences.empty());
}

TEST_CASE("dataset parse errors name the offending field") {
    const auto dir = std::filesystem::temp_directory_path() / "gcrn_data_test";
    std::filesystem::create_directories(dir);
    auto write_and_try = [&](const std::string& body) -> std::string {
        const auto p = dir / "bad.seq";
        std::ofstream out(p);
        out << body;
        out.close();
        try {
            load_dataset(p);
            return "";
        } catch (const ParseError& e) {
            return e.what();
        }
    };
    CHECK(write_and_try("GCRNSEQ v1\nx 3 4 1\n").find("sequence count") !=
          std::string::npos);
    CHECK(write_and_try("GCRNSEQ v1\n2\n").find("frame count") != std::string::npos);
    CHECK(write_and_try("GCRNSEQ v1\n2 3\n").find("vertex count") != std::string::npos);
    CHECK(write_and_try("GCRNSEQ v1\n2 3 4\n").find("channel count") != std::string::npos);
    CHECK(write_and_try("NOPE\n").find("magic") != std::string::npos);
    // Truncation inside a frame reports the line.
    CHECK(write_and_try("GCRNSEQ v1\n1 1 2 1\n0.5\n").find("end of file") !=
          std::string::npos);
}

TEST_CASE("token files round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "gcrn_data_test";
    std::filesystem::create_directories(dir);
    TokenDataset data;
    data.vocab = 12;
    for (int i = 0; i < 100; ++i) data.ids.push_back(i % 12);
    const auto p1 = dir / "a.tok";
    save_tokens(p1, data);
    const TokenDataset loaded = load_tokens(p1);
    CHECK(loaded.vocab == 12);
    CHECK(loaded.ids == data.ids);

    const auto bad = dir / "bad.tok";
    std::ofstream out(bad);
    out << "GCRNTOK v1\n3 2\n1 9\n";
    out.close();
    CHECK_THROWS_AS(load_tokens(bad), ParseError);
}
