#include "gcrn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gcrn/errors.hpp"
#include "gcrn/rng.hpp"

namespace gcrn {

const char* to_string(SpriteKind kind) {
    switch (kind) {
        case SpriteKind::square: return "square";
        case SpriteKind::cross: return "cross";
        case SpriteKind::glyph: return "glyph";
    }
    return "?";
}

SpriteKind sprite_kind_from_string(const std::string& s) {
    if (s == "square") return SpriteKind::square;
    if (s == "cross") return SpriteKind::cross;
    if (s == "glyph") return SpriteKind::glyph;
    throw ValueError("unknown sprite kind '" + s + "'");
}

Matrix make_sprite_bitmap(SpriteKind kind, std::size_t size) {
    if (size < 1) throw ValueError("make_sprite_bitmap: size must be >= 1");
    Matrix bmp(size, size);
    switch (kind) {
        case SpriteKind::square:
            for (double& v : bmp.data()) v = 1.0;
            break;
        case SpriteKind::cross: {
            const std::size_t mid = size / 2;
            for (std::size_t r = 0; r < size; ++r) {
                for (std::size_t c = 0; c < size; ++c) {
                    if (r == mid || c == mid) bmp(r, c) = 1.0;
                }
            }
            break;
        }
        case SpriteKind::glyph: {
            // Fixed asymmetric 5x5 pattern, nearest-sampled to the requested size.
            static const int pattern[5][5] = {{1, 1, 1, 1, 0},
                                              {1, 0, 0, 0, 0},
                                              {1, 1, 1, 0, 0},
                                              {1, 0, 0, 0, 0},
                                              {1, 0, 1, 1, 1}};
            for (std::size_t r = 0; r < size; ++r) {
                for (std::size_t c = 0; c < size; ++c) {
                    bmp(r, c) = pattern[r * 5 / size][c * 5 / size];
                }
            }
            break;
        }
    }
    return bmp;
}

namespace {

/// Side of the render box a sprite occupies; spinning sprites get the
/// circumscribed square so rotation never clips.
std::size_t render_extent(const Sprite& s) {
    const std::size_t side = s.bitmap.rows();
    if (s.omega == 0.0) return side;
    return static_cast<std::size_t>(
        std::ceil(static_cast<double>(side) * std::numbers::sqrt2));
}

double bilinear_sample(const Matrix& bmp, double r, double c) {
    const double rows = static_cast<double>(bmp.rows());
    const double cols = static_cast<double>(bmp.cols());
    if (r <= -1.0 || c <= -1.0 || r >= rows || c >= cols) return 0.0;
    const double fr = std::floor(r);
    const double fc = std::floor(c);
    const double wr = r - fr;
    const double wc = c - fc;
    auto at = [&](double rr, double cc) -> double {
        if (rr < 0.0 || cc < 0.0 || rr >= rows || cc >= cols) return 0.0;
        return bmp(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
    };
    return (1.0 - wr) * (1.0 - wc) * at(fr, fc) + (1.0 - wr) * wc * at(fr, fc + 1.0) +
           wr * (1.0 - wc) * at(fr + 1.0, fc) + wr * wc * at(fr + 1.0, fc + 1.0);
}

void bounce_axis(double& pos, double& vel, double limit) {
    if (limit <= 0.0) {
        pos = 0.0;
        vel = -vel;
        return;
    }
    for (int guard = 0; guard < 100; ++guard) {
        if (pos < 0.0) {
            pos = -pos;
            vel = -vel;
        } else if (pos > limit) {
            pos = 2.0 * limit - pos;
            vel = -vel;
        } else {
            return;
        }
    }
    pos = std::clamp(pos, 0.0, limit);
}

}  // namespace

std::vector<Matrix> render_moving_sequence(std::size_t patch, std::vector<Sprite> sprites,
                                           std::size_t frames) {
    if (patch < 1) throw ValueError("render_moving_sequence: patch must be >= 1");
    for (const Sprite& s : sprites) {
        if (s.bitmap.rows() != s.bitmap.cols() || s.bitmap.rows() == 0) {
            throw ValueError("render_moving_sequence: bitmap must be square");
        }
        if (render_extent(s) > patch) {
            throw ValueError("render_moving_sequence: sprite does not fit in the patch");
        }
    }

    std::vector<Matrix> out;
    out.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        Matrix frame(patch, patch);
        for (const Sprite& s : sprites) {
            const std::size_t box = render_extent(s);
            const double side = static_cast<double>(s.bitmap.rows());
            const double center = (static_cast<double>(box) - 1.0) / 2.0;
            const double inset = (static_cast<double>(box) - side) / 2.0;
            const double angle = s.omega * static_cast<double>(t);
            const double ca = std::cos(angle);
            const double sa = std::sin(angle);

            const auto r_lo = static_cast<std::size_t>(std::max(0.0, std::floor(s.row)));
            const auto c_lo = static_cast<std::size_t>(std::max(0.0, std::floor(s.col)));
            const std::size_t r_hi = std::min(patch, r_lo + box + 1);
            const std::size_t c_hi = std::min(patch, c_lo + box + 1);
            for (std::size_t pr = r_lo; pr < r_hi; ++pr) {
                for (std::size_t pc = c_lo; pc < c_hi; ++pc) {
                    double u = static_cast<double>(pr) - s.row - center;
                    double v = static_cast<double>(pc) - s.col - center;
                    if (angle != 0.0) {
                        const double ru = ca * u + sa * v;
                        const double rv = -sa * u + ca * v;
                        u = ru;
                        v = rv;
                    }
                    const double val = std::clamp(
                        bilinear_sample(s.bitmap, u + center - inset, v + center - inset),
                        0.0, 1.0);
                    frame(pr, pc) = std::max(frame(pr, pc), val);
                }
            }
        }
        out.push_back(std::move(frame));

        for (Sprite& s : sprites) {
            const double limit =
                static_cast<double>(patch) - static_cast<double>(render_extent(s));
            s.row += s.v_row;
            s.col += s.v_col;
            bounce_axis(s.row, s.v_row, limit);
            bounce_axis(s.col, s.v_col, limit);
        }
    }
    return out;
}

SequenceDataset gen_moving_shapes(const ShapesConfig& config) {
    if (config.n_shapes < 1) throw ValueError("gen_moving_shapes: need at least one shape");
    if (config.seq_len < 1) throw ValueError("gen_moving_shapes: seq_len must be >= 1");
    if (!(config.min_speed > 0.0) || config.max_speed < config.min_speed) {
        throw ValueError("gen_moving_shapes: need 0 < min_speed <= max_speed");
    }
    const Matrix bitmap = make_sprite_bitmap(config.kind, config.sprite_size);

    Sprite probe;
    probe.bitmap = bitmap;
    probe.omega = config.rotate ? 0.1 : 0.0;
    const std::size_t box = render_extent(probe);
    if (box > config.patch) {
        throw ValueError("gen_moving_shapes: sprite (extent " + std::to_string(box) +
                         ") does not fit in patch " + std::to_string(config.patch));
    }
    const double limit = static_cast<double>(config.patch - box);

    Rng rng(Rng::derive(config.seed, 0xda7a));
    SequenceDataset data;
    data.n = config.patch * config.patch;
    data.d = 1;

    for (std::size_t s = 0; s < config.count; ++s) {
        std::vector<Sprite> sprites(config.n_shapes);
        for (Sprite& sp : sprites) {
            sp.bitmap = bitmap;
            sp.row = rng.uniform(0.0, limit);
            sp.col = rng.uniform(0.0, limit);
            sp.v_row = rng.uniform(config.min_speed, config.max_speed) *
                       (rng.bernoulli(0.5) ? 1.0 : -1.0);
            sp.v_col = rng.uniform(config.min_speed, config.max_speed) *
                       (rng.bernoulli(0.5) ? 1.0 : -1.0);
            sp.omega = config.rotate ? rng.uniform(std::numbers::pi / 24.0,
                                                   std::numbers::pi / 8.0) *
                                           (rng.bernoulli(0.5) ? 1.0 : -1.0)
                                     : 0.0;
        }
        std::vector<Matrix> frames =
            render_moving_sequence(config.patch, std::move(sprites), config.seq_len);
        std::vector<Matrix> signals;
        signals.reserve(frames.size());
        for (const Matrix& f : frames) {
            Matrix sig(data.n, 1);
            for (std::size_t r = 0; r < config.patch; ++r) {
                for (std::size_t c = 0; c < config.patch; ++c) {
                    sig(r * config.patch + c, 0) = f(r, c);
                }
            }
            signals.push_back(std::move(sig));
        }
        data.sequences.push_back(std::move(signals));
    }
    return data;
}

std::vector<Matrix> tokens_to_signals(std::span<const std::size_t> ids,
                                      std::size_t vocab) {
    std::vector<Matrix> out;
    out.reserve(ids.size());
    for (std::size_t id : ids) {
        if (id >= vocab) {
            throw ValueError("tokens_to_signals: id " + std::to_string(id) +
                             " out of range for vocabulary " + std::to_string(vocab));
        }
        Matrix frame(vocab, 1);
        frame(id, 0) = 1.0;
        out.push_back(std::move(frame));
    }
    return out;
}

namespace {

struct Window {
    std::size_t seq;
    std::size_t start;
};

std::vector<Window> shuffled_windows(std::span<const std::size_t> lengths,
                                     std::size_t unroll_steps, std::uint64_t seed) {
    if (unroll_steps < 1) throw ValueError("make_batches: unroll_steps must be >= 1");
    std::vector<Window> windows;
    for (std::size_t s = 0; s < lengths.size(); ++s) {
        if (lengths[s] < unroll_steps + 1) {
            throw ValueError("make_batches: sequence " + std::to_string(s) + " has " +
                             std::to_string(lengths[s]) + " frames, needs at least " +
                             std::to_string(unroll_steps + 1));
        }
        const std::size_t count = (lengths[s] - 1) / unroll_steps;
        for (std::size_t w = 0; w < count; ++w) {
            windows.push_back({s, w * unroll_steps});
        }
    }
    Rng rng(Rng::derive(seed, 0xba7c));
    for (std::size_t i = windows.size(); i > 1; --i) {
        std::swap(windows[i - 1], windows[rng.below(i)]);
    }
    return windows;
}

}  // namespace

std::vector<SequenceBatch> make_batches(const SequenceDataset& data,
                                        std::size_t batch_size,
                                        std::size_t unroll_steps, std::uint64_t seed) {
    if (batch_size < 1) throw ValueError("make_batches: batch_size must be >= 1");
    std::vector<std::size_t> lengths;
    lengths.reserve(data.sequences.size());
    for (const auto& s : data.sequences) lengths.push_back(s.size());
    const std::vector<Window> windows = shuffled_windows(lengths, unroll_steps, seed);

    std::vector<SequenceBatch> batches;
    for (std::size_t at = 0; at < windows.size(); at += batch_size) {
        const std::size_t b_count = std::min(batch_size, windows.size() - at);
        SequenceBatch batch;
        batch.inputs.assign(unroll_steps, {});
        batch.dense_targets.assign(unroll_steps, {});
        for (std::size_t t = 0; t < unroll_steps; ++t) {
            batch.inputs[t].reserve(b_count);
            batch.dense_targets[t].reserve(b_count);
            for (std::size_t b = 0; b < b_count; ++b) {
                const Window& w = windows[at + b];
                batch.inputs[t].push_back(data.sequences[w.seq][w.start + t]);
                batch.dense_targets[t].push_back(data.sequences[w.seq][w.start + t + 1]);
            }
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

std::vector<SequenceBatch> make_token_batches(const TokenDataset& data,
                                              std::size_t batch_size,
                                              std::size_t unroll_steps,
                                              std::uint64_t seed) {
    if (batch_size < 1) throw ValueError("make_batches: batch_size must be >= 1");
    const std::size_t lengths[1] = {data.ids.size()};
    const std::vector<Window> windows = shuffled_windows(lengths, unroll_steps, seed);

    std::vector<SequenceBatch> batches;
    for (std::size_t at = 0; at < windows.size(); at += batch_size) {
        const std::size_t b_count = std::min(batch_size, windows.size() - at);
        SequenceBatch batch;
        batch.inputs.assign(unroll_steps, {});
        batch.token_targets.assign(unroll_steps, {});
        for (std::size_t t = 0; t < unroll_steps; ++t) {
            for (std::size_t b = 0; b < b_count; ++b) {
                const Window& w = windows[at + b];
                const std::size_t id = data.ids[w.start + t];
                if (id >= data.vocab) {
                    throw ValueError("make_token_batches: id out of range");
                }
                Matrix frame(data.vocab, 1);
                frame(id, 0) = 1.0;
                batch.inputs[t].push_back(std::move(frame));
                batch.token_targets[t].push_back(data.ids[w.start + t + 1]);
            }
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

// ---------------------------------------------------------------------------
// File formats

void save_dataset(const std::filesystem::path& path, const SequenceDataset& data) {
    for (const auto& seq : data.sequences) {
        if (seq.size() != data.sequences.front().size()) {
            throw ValueError("save_dataset: ragged sequence lengths");
        }
        for (const Matrix& f : seq) {
            if (f.rows() != data.n || f.cols() != data.d) {
                throw ValueError("save_dataset: frame shape mismatch");
            }
        }
    }
    std::ofstream out(path);
    if (!out) throw ValueError("save_dataset: cannot open " + path.string());
    const std::size_t t_len = data.sequences.empty() ? 0 : data.sequences.front().size();
    out << "GCRNSEQ v1\n"
        << data.sequences.size() << " " << t_len << " " << data.n << " " << data.d
        << "\n";
    char buf[64];
    for (const auto& seq : data.sequences) {
        for (const Matrix& f : seq) {
            for (std::size_t r = 0; r < data.n; ++r) {
                for (std::size_t c = 0; c < data.d; ++c) {
                    std::snprintf(buf, sizeof buf, "%.17g", f(r, c));
                    out << buf << (c + 1 == data.d ? "" : " ");
                }
                out << "\n";
            }
        }
    }
    if (!out) throw ValueError("save_dataset: write failed for " + path.string());
}

SequenceDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("load_dataset: cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::string& {
        if (!std::getline(in, line)) {
            throw ParseError("load_dataset: unexpected end of file", line_no + 1);
        }
        ++line_no;
        return line;
    };

    if (next_line() != "GCRNSEQ v1") throw ParseError("load_dataset: bad magic", line_no);

    std::size_t s_count = 0, t_len = 0;
    SequenceDataset data;
    {
        std::istringstream hdr(next_line());
        if (!(hdr >> s_count)) throw ParseError("load_dataset: bad sequence count", line_no);
        if (!(hdr >> t_len)) throw ParseError("load_dataset: bad frame count", line_no);
        if (!(hdr >> data.n)) throw ParseError("load_dataset: bad vertex count", line_no);
        if (!(hdr >> data.d)) throw ParseError("load_dataset: bad channel count", line_no);
    }
    if (s_count > 0 && (data.n == 0 || data.d == 0)) {
        throw ParseError("load_dataset: zero-sized frames", line_no);
    }

    data.sequences.reserve(s_count);
    for (std::size_t s = 0; s < s_count; ++s) {
        std::vector<Matrix> seq;
        seq.reserve(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            Matrix frame(data.n, data.d);
            for (std::size_t r = 0; r < data.n; ++r) {
                std::istringstream row(next_line());
                for (std::size_t c = 0; c < data.d; ++c) {
                    if (!(row >> frame(r, c))) {
                        throw ParseError("load_dataset: bad value", line_no);
                    }
                    if (!std::isfinite(frame(r, c))) {
                        throw ParseError("load_dataset: non-finite value", line_no);
                    }
                }
            }
            seq.push_back(std::move(frame));
        }
        data.sequences.push_back(std::move(seq));
    }
    return data;
}

void save_tokens(const std::filesystem::path& path, const TokenDataset& data) {
    std::ofstream out(path);
    if (!out) throw ValueError("save_tokens: cannot open " + path.string());
    out << "GCRNTOK v1\n" << data.vocab << " " << data.ids.size() << "\n";
    for (std::size_t i = 0; i < data.ids.size(); ++i) {
        out << data.ids[i] << ((i + 1) % 20 == 0 || i + 1 == data.ids.size() ? "\n" : " ");
    }
    if (!out) throw ValueError("save_tokens: write failed for " + path.string());
}

TokenDataset load_tokens(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("load_tokens: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "GCRNTOK v1") {
        throw ParseError("load_tokens: bad magic", 1);
    }
    TokenDataset data;
    std::size_t count = 0;
    if (!std::getline(in, line)) throw ParseError("load_tokens: missing header", 2);
    {
        std::istringstream hdr(line);
        if (!(hdr >> data.vocab)) throw ParseError("load_tokens: bad vocabulary size", 2);
        if (!(hdr >> count)) throw ParseError("load_tokens: bad token count", 2);
    }
    data.ids.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t id = 0;
        if (!(in >> id)) throw ParseError("load_tokens: truncated id stream", 3);
        if (id >= data.vocab) throw ParseError("load_tokens: id out of range", 3);
        data.ids.push_back(id);
    }
    return data;
}

}  // namespace gcrn
