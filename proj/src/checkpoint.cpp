#include "gcrn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gcrn/errors.hpp"

namespace gcrn {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
    out << name << " 2 " << m.rows() << " " << m.cols() << "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out << fmt(m(r, c)) << (c + 1 == m.cols() ? "" : " ");
        }
        out << "\n";
    }
}

class LineReader {
  public:
    explicit LineReader(std::istream& in) : in_(in) {}

    std::string next(const char* what) {
        std::string line;
        if (!std::getline(in_, line)) {
            throw ParseError(std::string("checkpoint: missing ") + what, line_ + 1);
        }
        ++line_;
        return line;
    }

    std::size_t line() const { return line_; }

  private:
    std::istream& in_;
    std::size_t line_ = 0;
};

Matrix read_tensor_body(LineReader& lines, const std::string& name, std::size_t rows,
                        std::size_t cols) {
    Matrix m(rows, cols);
    std::string token;
    for (std::size_t r = 0; r < rows; ++r) {
        std::istringstream row(lines.next("tensor row"));
        for (std::size_t c = 0; c < cols; ++c) {
            // strtod semantics: accepts nan/inf, so any value the writer can
            // emit (a diverged run's parameters included) loads back.
            if (!(row >> token)) {
                throw ParseError("checkpoint: bad value in tensor '" + name + "'",
                                 lines.line());
            }
            try {
                m(r, c) = std::stod(token);
            } catch (const std::exception&) {
                throw ParseError("checkpoint: bad value in tensor '" + name + "'",
                                 lines.line());
            }
        }
    }
    return m;
}

struct TensorHeader {
    std::string name;
    std::size_t rows, cols;
};

TensorHeader read_tensor_header(LineReader& lines) {
    std::istringstream hdr(lines.next("tensor header"));
    TensorHeader out;
    std::size_t ndim = 0;
    if (!(hdr >> out.name >> ndim) || ndim != 2 || !(hdr >> out.rows >> out.cols)) {
        throw ParseError("checkpoint: bad tensor header", lines.line());
    }
    return out;
}

}  // namespace

void checkpoint_save(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path);
    if (!out) throw ValueError("checkpoint_save: cannot open " + path.string());

    out << "GCRNCKPT v1\n";
    out << "task " << ckpt.task << "\n";
    out << "lambda_mode "
        << (ckpt.lambda_mode == LambdaMaxMode::estimate ? "estimate" : "upper_bound")
        << "\n";

    const ModelSpec& spec = ckpt.model.spec;
    out << "cells " << spec.cells.size() << "\n";
    for (std::size_t i = 0; i < spec.cells.size(); ++i) {
        const CellSpec& c = spec.cells[i];
        out << "cell " << i << " " << to_string(c.kind) << " n " << c.n << " d_x " << c.d_x
            << " d_h " << c.d_h << " k " << c.k << " peepholes " << to_string(c.peepholes)
            << "\n";
    }
    out << "readout " << to_string(spec.readout) << " d_out " << spec.d_out << "\n";

    std::vector<Coo> upper;
    for (const Coo& t : to_triples(ckpt.graph_adjacency)) {
        if (t.row < t.col) upper.push_back(t);
    }
    out << "graph " << ckpt.graph_adjacency.n_rows() << " " << upper.size() << "\n";
    for (const Coo& t : upper) {
        out << t.row << " " << t.col << " " << fmt(t.value) << "\n";
    }

    const auto tensors = ckpt.model.tensors();
    out << "tensors " << tensors.size() << "\n";
    for (const ConstTensorRef& r : tensors) write_tensor(out, r.name, *r.tensor);

    out << "opt " << to_string(ckpt.opt_kind) << " " << ckpt.opt_state.acc.size() << "\n";
    for (std::size_t i = 0; i < ckpt.opt_state.acc.size(); ++i) {
        write_tensor(out, "acc." + tensors[i].name, ckpt.opt_state.acc[i]);
    }

    out << "meta epoch " << ckpt.train_state.epoch << "\n";
    out << "meta best_valid " << fmt(ckpt.train_state.best_valid) << "\n";
    out << "meta since_improve " << ckpt.train_state.since_improve << "\n";
    out << "meta seed " << ckpt.seed << "\n";
    out << "end\n";
    if (!out) throw ValueError("checkpoint_save: write failed for " + path.string());
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("checkpoint_load: cannot open " + path.string());
    LineReader lines(in);

    if (lines.next("magic") != "GCRNCKPT v1") {
        throw ParseError("checkpoint: bad magic", lines.line());
    }

    Checkpoint ckpt;
    {
        std::istringstream ss(lines.next("task"));
        std::string key;
        if (!(ss >> key >> ckpt.task) || key != "task" ||
            (ckpt.task != "shapes" && ckpt.task != "tokens")) {
            throw ParseError("checkpoint: bad task line", lines.line());
        }
    }
    {
        std::istringstream ss(lines.next("lambda_mode"));
        std::string key, mode;
        if (!(ss >> key >> mode) || key != "lambda_mode") {
            throw ParseError("checkpoint: bad lambda_mode line", lines.line());
        }
        if (mode == "estimate") {
            ckpt.lambda_mode = LambdaMaxMode::estimate;
        } else if (mode == "upper_bound") {
            ckpt.lambda_mode = LambdaMaxMode::upper_bound;
        } else {
            throw ParseError("checkpoint: bad lambda_mode value", lines.line());
        }
    }

    ModelSpec spec;
    std::size_t cell_count = 0;
    {
        std::istringstream ss(lines.next("cells"));
        std::string key;
        if (!(ss >> key >> cell_count) || key != "cells" || cell_count < 1 ||
            cell_count > 2) {
            throw ParseError("checkpoint: bad cells line", lines.line());
        }
    }
    for (std::size_t i = 0; i < cell_count; ++i) {
        std::istringstream ss(lines.next("cell spec"));
        std::string key, kind, kn, kdx, kdh, kk, kp, peep;
        std::size_t idx = 0;
        CellSpec c;
        if (!(ss >> key >> idx >> kind >> kn >> c.n >> kdx >> c.d_x >> kdh >> c.d_h >>
              kk >> c.k >> kp >> peep) ||
            key != "cell" || idx != i || kn != "n" || kdx != "d_x" || kdh != "d_h" ||
            kk != "k" || kp != "peepholes") {
            throw ParseError("checkpoint: bad cell spec line", lines.line());
        }
        try {
            c.kind = cell_kind_from_string(kind);
            c.peepholes = peephole_mode_from_string(peep);
        } catch (const ValueError& e) {
            throw ParseError(std::string("checkpoint: ") + e.what(), lines.line());
        }
        spec.cells.push_back(c);
    }
    {
        std::istringstream ss(lines.next("readout"));
        std::string key, kind, kd;
        if (!(ss >> key >> kind >> kd >> spec.d_out) || key != "readout" || kd != "d_out") {
            throw ParseError("checkpoint: bad readout line", lines.line());
        }
        try {
            spec.readout = readout_kind_from_string(kind);
        } catch (const ValueError& e) {
            throw ParseError(std::string("checkpoint: ") + e.what(), lines.line());
        }
    }

    {
        std::istringstream ss(lines.next("graph"));
        std::string key;
        std::size_t n = 0, m = 0;
        if (!(ss >> key >> n >> m) || key != "graph") {
            throw ParseError("checkpoint: bad graph line", lines.line());
        }
        std::vector<Coo> triples;
        triples.reserve(2 * m);
        for (std::size_t e = 0; e < m; ++e) {
            std::istringstream row(lines.next("graph edge"));
            std::size_t i = 0, j = 0;
            double w = 0.0;
            if (!(row >> i >> j >> w) || i >= j || j >= n) {
                throw ParseError("checkpoint: bad graph edge", lines.line());
            }
            triples.push_back({i, j, w});
            triples.push_back({j, i, w});
        }
        ckpt.graph_adjacency = csr_from_coo(n, n, triples);
    }

    ckpt.model = model_zeros(spec);
    auto refs = ckpt.model.tensors();
    {
        std::istringstream ss(lines.next("tensors"));
        std::string key;
        std::size_t count = 0;
        if (!(ss >> key >> count) || key != "tensors" || count != refs.size()) {
            throw ParseError("checkpoint: tensor count does not match the spec",
                             lines.line());
        }
    }
    for (TensorRef& ref : refs) {
        const TensorHeader hdr = read_tensor_header(lines);
        if (hdr.name != ref.name) {
            throw ParseError("checkpoint: expected tensor '" + ref.name + "', found '" +
                                 hdr.name + "'",
                             lines.line());
        }
        if (hdr.rows != ref.tensor->rows() || hdr.cols != ref.tensor->cols()) {
            throw ParseError("checkpoint: tensor '" + ref.name + "' has shape " +
                                 std::to_string(hdr.rows) + "x" + std::to_string(hdr.cols) +
                                 ", spec wants " + std::to_string(ref.tensor->rows()) +
                                 "x" + std::to_string(ref.tensor->cols()),
                             lines.line());
        }
        *ref.tensor = read_tensor_body(lines, hdr.name, hdr.rows, hdr.cols);
    }

    {
        std::istringstream ss(lines.next("opt"));
        std::string key, kind;
        std::size_t count = 0;
        if (!(ss >> key >> kind >> count) || key != "opt") {
            throw ParseError("checkpoint: bad opt line", lines.line());
        }
        ckpt.opt_kind = optimizer_kind_from_string(kind);
        ckpt.opt_state.kind = ckpt.opt_kind;
        for (std::size_t i = 0; i < count; ++i) {
            const TensorHeader hdr = read_tensor_header(lines);
            ckpt.opt_state.acc.push_back(
                read_tensor_body(lines, hdr.name, hdr.rows, hdr.cols));
        }
    }

    auto read_meta = [&](const char* name) -> std::string {
        std::istringstream ss(lines.next("meta"));
        std::string key, field, value;
        if (!(ss >> key >> field >> value) || key != "meta" || field != name) {
            throw ParseError(std::string("checkpoint: expected 'meta ") + name + "'",
                             lines.line());
        }
        return value;
    };
    ckpt.train_state.epoch = std::stoull(read_meta("epoch"));
    ckpt.train_state.best_valid = std::stod(read_meta("best_valid"));
    ckpt.train_state.since_improve = std::stoull(read_meta("since_improve"));
    ckpt.seed = std::stoull(read_meta("seed"));
    if (lines.next("end") != "end") {
        throw ParseError("checkpoint: missing end marker", lines.line());
    }
    return ckpt;
}

}  // namespace gcrn
