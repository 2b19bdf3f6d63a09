#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gcrn/matrix.hpp"

namespace gcrn {

enum class SpriteKind { square, cross, glyph };

const char* to_string(SpriteKind kind);
SpriteKind sprite_kind_from_string(const std::string& s);

/// Desk-scale analog of the bouncing-digits regime: parametric sprites moving
/// with constant velocity inside a square patch, reflecting off the walls,
/// optionally spinning about their centers.
struct ShapesConfig {
    std::size_t patch = 16;
    std::size_t n_shapes = 2;
    SpriteKind kind = SpriteKind::square;
    std::size_t sprite_size = 5;
    double min_speed = 0.5;  // per-axis velocity magnitude bounds
    double max_speed = 1.5;
    bool rotate = false;
    std::size_t seq_len = 20;
    std::size_t count = 20;
    std::uint64_t seed = 1;
};

/// One moving sprite: a bitmap with values in [0, 1], a fractional top-left
/// position, a per-frame velocity, and an angular velocity (radians/frame).
struct Sprite {
    Matrix bitmap;
    double row = 0.0, col = 0.0;
    double v_row = 0.0, v_col = 0.0;
    double omega = 0.0;
};

Matrix make_sprite_bitmap(SpriteKind kind, std::size_t size);

/// Renders `frames` patch x patch frames. Sprites translate with elastic
/// wall bounces and rotate about their centers with bilinear resampling;
/// overlaps composite by elementwise max. Values stay in [0, 1].
std::vector<Matrix> render_moving_sequence(std::size_t patch, std::vector<Sprite> sprites,
                                           std::size_t frames);

/// Sequences of graph signals over a fixed vertex set.
struct SequenceDataset {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<std::vector<Matrix>> sequences;  // [s][t] -> n x d
};

/// A token id stream over a fixed vocabulary.
struct TokenDataset {
    std::size_t vocab = 0;
    std::vector<std::size_t> ids;
};

/// Deterministic dataset of bouncing-sprite sequences, each frame flattened
/// row-major to an n x 1 signal with n = patch^2.
SequenceDataset gen_moving_shapes(const ShapesConfig& config);

/// One-hot graph signals over an n = vocab vertex set, d_x = 1.
std::vector<Matrix> tokens_to_signals(std::span<const std::size_t> ids,
                                      std::size_t vocab);

/// A batch of aligned sequence windows with next-step targets.
struct SequenceBatch {
    std::vector<std::vector<Matrix>> inputs;            // [t][b] -> n x d
    std::vector<std::vector<Matrix>> dense_targets;     // next-frame task
    std::vector<std::vector<std::size_t>> token_targets;  // next-token task

    std::size_t time_steps() const { return inputs.size(); }
    std::size_t batch_size() const { return inputs.empty() ? 0 : inputs[0].size(); }
    bool has_tokens() const { return !token_targets.empty(); }
};

/// Cuts every sequence into contiguous unroll_steps windows (targets shifted
/// by one step; partial tails dropped), shuffles the windows deterministically
/// and groups them into batches.
std::vector<SequenceBatch> make_batches(const SequenceDataset& data,
                                        std::size_t batch_size,
                                        std::size_t unroll_steps, std::uint64_t seed);

/// Same windowing over a token stream; inputs are one-hot signals, targets
/// the next token ids.
std::vector<SequenceBatch> make_token_batches(const TokenDataset& data,
                                              std::size_t batch_size,
                                              std::size_t unroll_steps,
                                              std::uint64_t seed);

// GCRNSEQ v1 / GCRNTOK v1 text formats; exact 64-bit round trips.
void save_dataset(const std::filesystem::path& path, const SequenceDataset& data);
SequenceDataset load_dataset(const std::filesystem::path& path);
void save_tokens(const std::filesystem::path& path, const TokenDataset& data);
TokenDataset load_tokens(const std::filesystem::path& path);

}  // namespace gcrn
