#include "gcrn/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "gcrn/errors.hpp"

namespace gcrn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct KeyValue {
    std::string value;
    std::size_t line;
};

std::size_t parse_count(const std::string& v, const std::string& key, std::size_t line) {
    try {
        const long long x = std::stoll(v);
        if (x < 0) throw std::out_of_range("negative");
        return static_cast<std::size_t>(x);
    } catch (const std::exception&) {
        throw ParseError("config: bad count for '" + key + "': " + v, line);
    }
}

double parse_real(const std::string& v, const std::string& key, std::size_t line) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ParseError("config: bad number for '" + key + "': " + v, line);
    }
}

bool parse_bool(const std::string& v, const std::string& key, std::size_t line) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ParseError("config: bad boolean for '" + key + "': " + v, line);
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void RunConfig::validate() const {
    if (task != "shapes" && task != "tokens") {
        throw ValueError("config: task must be 'shapes' or 'tokens'");
    }
    if (graph_source != "grid" && graph_source != "file" && graph_source != "knn") {
        throw ValueError("config: graph.source must be grid, file or knn");
    }
    if (graph_source == "file" && graph_file.empty()) {
        throw ValueError("config: graph.file is required for graph.source = file");
    }
    if (graph_source == "knn" && points_file.empty()) {
        throw ValueError("config: graph.points is required for graph.source = knn");
    }
    if (layers < 1 || layers > 2) throw ValueError("config: cell.layers must be 1 or 2");
    if (data_path.empty()) throw ValueError("config: data.path is required");
    train.validate();
}

RunConfig parse_config(std::istream& in) {
    std::map<std::string, KeyValue> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config: expected 'key = value', got '" + line + "'", line_no);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ParseError("config: empty key or value", line_no);
        }
        if (!kv.emplace(key, KeyValue{value, line_no}).second) {
            throw ParseError("config: duplicate key '" + key + "'", line_no);
        }
    }

    RunConfig c;
    auto take = [&](const char* key) -> std::optional<KeyValue> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        KeyValue out = it->second;
        kv.erase(it);
        return out;
    };

    if (auto v = take("task")) c.task = v->value;

    if (auto v = take("cell.kind")) {
        try {
            c.cell_kind = cell_kind_from_string(v->value);
        } catch (const ValueError& e) {
            throw ParseError(std::string("config: ") + e.what(), v->line);
        }
    }
    if (auto v = take("cell.d_h")) c.d_h = parse_count(v->value, "cell.d_h", v->line);
    if (auto v = take("cell.k")) c.k = parse_count(v->value, "cell.k", v->line);
    if (auto v = take("cell.peepholes")) {
        try {
            c.peepholes = peephole_mode_from_string(v->value);
        } catch (const ValueError& e) {
            throw ParseError(std::string("config: ") + e.what(), v->line);
        }
    }
    if (auto v = take("cell.layers")) c.layers = parse_count(v->value, "cell.layers", v->line);

    if (auto v = take("graph.source")) c.graph_source = v->value;
    if (auto v = take("graph.grid")) {
        std::size_t rows = 0, cols = 0, conn = 0;
        char x1 = 0, x2 = 0;
        std::istringstream ss(v->value);
        if (!(ss >> rows >> x1 >> cols >> x2 >> conn) || x1 != 'x' || x2 != 'x' ||
            !ss.eof()) {
            throw ParseError("config: graph.grid must look like 16x16x8", v->line);
        }
        c.grid_rows = rows;
        c.grid_cols = cols;
        c.grid_conn = conn;
    }
    if (auto v = take("graph.file")) c.graph_file = v->value;
    if (auto v = take("graph.points")) c.points_file = v->value;
    if (auto v = take("graph.knn_k")) c.knn_k = parse_count(v->value, "graph.knn_k", v->line);
    if (auto v = take("graph.metric")) {
        if (v->value == "euclidean") {
            c.metric = Metric::euclidean;
        } else if (v->value == "cosine") {
            c.metric = Metric::cosine;
        } else {
            throw ParseError("config: graph.metric must be euclidean or cosine", v->line);
        }
    }
    if (auto v = take("graph.sigma")) {
        if (v->value == "auto") {
            c.sigma.reset();
        } else {
            c.sigma = parse_real(v->value, "graph.sigma", v->line);
        }
    }
    if (auto v = take("graph.lambda_max")) {
        if (v->value == "estimate") {
            c.lambda_mode = LambdaMaxMode::estimate;
        } else if (v->value == "upper_bound") {
            c.lambda_mode = LambdaMaxMode::upper_bound;
        } else {
            throw ParseError("config: graph.lambda_max must be estimate or upper_bound",
                             v->line);
        }
    }

    if (auto v = take("optim.kind")) {
        try {
            c.optim.kind = optimizer_kind_from_string(v->value);
        } catch (const ValueError& e) {
            throw ParseError(std::string("config: ") + e.what(), v->line);
        }
        if (c.optim.kind == OptimizerKind::clipped_sgd && !kv.count("optim.lr")) {
            c.optim.learning_rate = 1.0;
        }
    }
    if (auto v = take("optim.lr")) {
        c.optim.learning_rate = parse_real(v->value, "optim.lr", v->line);
    }
    if (auto v = take("optim.decay")) {
        c.optim.decay_rate = parse_real(v->value, "optim.decay", v->line);
    }
    if (auto v = take("optim.epsilon")) {
        c.optim.epsilon = parse_real(v->value, "optim.epsilon", v->line);
    }
    if (auto v = take("optim.max_grad_norm")) {
        c.optim.max_grad_norm = parse_real(v->value, "optim.max_grad_norm", v->line);
    }
    if (auto v = take("optim.sched_start")) {
        c.optim.sched_start = parse_count(v->value, "optim.sched_start", v->line);
    }

    if (auto v = take("train.unroll")) {
        c.train.unroll_steps = parse_count(v->value, "train.unroll", v->line);
    }
    if (auto v = take("train.batch")) {
        c.train.batch_size = parse_count(v->value, "train.batch", v->line);
    }
    if (auto v = take("train.epochs")) {
        c.train.epochs = parse_count(v->value, "train.epochs", v->line);
    }
    if (auto v = take("train.dropout_keep")) {
        c.train.dropout_keep = parse_real(v->value, "train.dropout_keep", v->line);
    }
    if (auto v = take("train.patience")) {
        c.train.early_stop_patience = parse_count(v->value, "train.patience", v->line);
    }
    if (auto v = take("train.seed")) {
        c.train.seed = parse_count(v->value, "train.seed", v->line);
    }
    if (auto v = take("train.deterministic")) {
        c.train.deterministic = parse_bool(v->value, "train.deterministic", v->line);
    }

    if (auto v = take("data.path")) c.data_path = v->value;
    if (auto v = take("data.valid_path")) c.valid_path = v->value;
    if (auto v = take("out.dir")) c.out_dir = v->value;

    if (!kv.empty()) {
        const auto& [key, item] = *kv.begin();
        throw ParseError("config: unknown key '" + key + "'", item.line);
    }
    c.validate();
    return c;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("config: cannot open " + path.string());
    return parse_config(in);
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream out;
    out << "task = " << c.task << "\n";
    out << "cell.kind = " << to_string(c.cell_kind) << "\n";
    out << "cell.d_h = " << c.d_h << "\n";
    out << "cell.k = " << c.k << "\n";
    out << "cell.peepholes = " << to_string(c.peepholes) << "\n";
    out << "cell.layers = " << c.layers << "\n";
    out << "graph.source = " << c.graph_source << "\n";
    out << "graph.grid = " << c.grid_rows << "x" << c.grid_cols << "x" << c.grid_conn
        << "\n";
    if (!c.graph_file.empty()) out << "graph.file = " << c.graph_file << "\n";
    if (!c.points_file.empty()) out << "graph.points = " << c.points_file << "\n";
    out << "graph.knn_k = " << c.knn_k << "\n";
    out << "graph.metric = " << (c.metric == Metric::euclidean ? "euclidean" : "cosine")
        << "\n";
    out << "graph.sigma = " << (c.sigma ? format_real(*c.sigma) : "auto") << "\n";
    out << "graph.lambda_max = "
        << (c.lambda_mode == LambdaMaxMode::estimate ? "estimate" : "upper_bound") << "\n";
    out << "optim.kind = " << to_string(c.optim.kind) << "\n";
    out << "optim.lr = " << format_real(c.optim.learning_rate) << "\n";
    out << "optim.decay = " << format_real(c.optim.decay_rate) << "\n";
    out << "optim.epsilon = " << format_real(c.optim.epsilon) << "\n";
    out << "optim.max_grad_norm = " << format_real(c.optim.max_grad_norm) << "\n";
    out << "optim.sched_start = " << c.optim.sched_start << "\n";
    out << "train.unroll = " << c.train.unroll_steps << "\n";
    out << "train.batch = " << c.train.batch_size << "\n";
    out << "train.epochs = " << c.train.epochs << "\n";
    out << "train.dropout_keep = " << format_real(c.train.dropout_keep) << "\n";
    out << "train.patience = " << c.train.early_stop_patience << "\n";
    out << "train.seed = " << c.train.seed << "\n";
    out << "train.deterministic = " << (c.train.deterministic ? "true" : "false") << "\n";
    out << "data.path = " << c.data_path << "\n";
    if (!c.valid_path.empty()) out << "data.valid_path = " << c.valid_path << "\n";
    out << "out.dir = " << c.out_dir << "\n";
    return out.str();
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

}  // namespace gcrn
