#include "patternforge/report.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace patternforge {

namespace {

const std::set<std::string> kTasks = {"verify", "slab-spectrum", "slab-branch",
                                      "lamellae", "lattice"};

} // namespace

void RunConfig::validate() const {
    if (!kTasks.count(task)) throw ConfigError("unknown task '" + task + "'");
    if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0");
    if (task != "verify" && gamma < 0.0) throw ConfigError("gamma must be >= 0");
    if (task == "slab-branch" || task == "lamellae") {
        if (!(gamma > 0.0)) throw ConfigError(task + " requires gamma > 0");
    }
    if (task == "slab-branch" && s_grid.empty())
        throw ConfigError("slab-branch requires an s grid");
    if (task == "lamellae" && eps_grid.empty())
        throw ConfigError("lamellae requires an epsilon grid");
    if (task == "lattice") {
        if (n_dim != 2 && n_dim != 3) throw ConfigError("lattice: N must be 2 or 3");
        if (m_dim < 0 || m_dim > n_dim) throw ConfigError("lattice: need 0 <= M <= N");
        if (eps_grid.empty()) throw ConfigError("lattice requires an epsilon grid");
        if (gamma <= 0.0 && gamma_frac <= 0.0)
            throw ConfigError("lattice requires gamma or gamma-frac");
    }
    if (n_target < 16 || n_target % 2 != 0)
        throw ConfigError("n_target must be even and >= 16");
    if (n_quad % n_target != 0) throw ConfigError("n_quad must be a multiple of n_target");
    if (kband < 2) throw ConfigError("kband must be >= 2");
    if (threads < 0) throw ConfigError("threads must be >= 0");
}

std::string RunConfig::file_prefix() const {
    std::ostringstream os;
    os << task << "_kappa" << kappa << "_gamma" << gamma;
    return os.str();
}

namespace {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

RunConfig config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known = {
        "task",    "kappa",   "gamma",    "gamma_frac", "s_grid",  "eps_grid",
        "s_value", "n_dim",   "m_dim",    "basis",      "ell_max", "k_max",
        "kband",   "samples", "seed",     "n_target",   "n_quad",  "threads",
        "out_dir", "force",   "dump_shapes"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");

    RunConfig c;
    if (!j.contains("task")) throw ConfigError("config needs a 'task'");
    c.task = j.at("task").get<std::string>();
    read_opt(j, "kappa", c.kappa);
    read_opt(j, "gamma", c.gamma);
    read_opt(j, "gamma_frac", c.gamma_frac);
    read_opt(j, "s_value", c.s_value);
    read_opt(j, "n_dim", c.n_dim);
    read_opt(j, "m_dim", c.m_dim);
    read_opt(j, "ell_max", c.ell_max);
    read_opt(j, "k_max", c.k_max);
    read_opt(j, "kband", c.kband);
    read_opt(j, "samples", c.samples);
    read_opt(j, "seed", c.seed);
    read_opt(j, "n_target", c.n_target);
    read_opt(j, "n_quad", c.n_quad);
    read_opt(j, "threads", c.threads);
    read_opt(j, "out_dir", c.out_dir);
    read_opt(j, "force", c.force);
    read_opt(j, "dump_shapes", c.dump_shapes);
    if (j.contains("s_grid")) c.s_grid = j.at("s_grid").get<std::vector<double>>();
    if (j.contains("eps_grid")) c.eps_grid = j.at("eps_grid").get<std::vector<double>>();
    if (j.contains("basis")) {
        for (const auto& row : j.at("basis")) {
            std::array<double, 3> b = {0.0, 0.0, 0.0};
            int i = 0;
            for (const auto& x : row) {
                if (i >= 3) throw ConfigError("basis vectors take at most 3 components");
                b[i++] = x.get<double>();
            }
            c.basis.push_back(b);
        }
    }
    c.validate();
    return c;
}

std::string config_to_json_text(const RunConfig& c) {
    nlohmann::json j;
    j["task"] = c.task;
    j["kappa"] = c.kappa;
    j["gamma"] = c.gamma;
    if (c.gamma_frac > 0.0) j["gamma_frac"] = c.gamma_frac;
    if (!c.s_grid.empty()) j["s_grid"] = c.s_grid;
    if (!c.eps_grid.empty()) j["eps_grid"] = c.eps_grid;
    j["s_value"] = c.s_value;
    j["n_dim"] = c.n_dim;
    j["m_dim"] = c.m_dim;
    if (!c.basis.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& b : c.basis) rows.push_back({b[0], b[1], b[2]});
        j["basis"] = rows;
    }
    j["ell_max"] = c.ell_max;
    j["k_max"] = c.k_max;
    j["kband"] = c.kband;
    j["samples"] = c.samples;
    j["seed"] = c.seed;
    j["n_target"] = c.n_target;
    j["n_quad"] = c.n_quad;
    j["threads"] = c.threads;
    j["out_dir"] = c.out_dir;
    j["force"] = c.force;
    j["dump_shapes"] = c.dump_shapes;
    return j.dump(2);
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        double a, b, step;
        char c1, c2;
        std::istringstream is(text);
        if (!(is >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':')
            throw ConfigError("grid must be start:end:step or comma-separated");
        if (step == 0.0) throw ConfigError("grid step must be nonzero");
        if ((b - a) / step < 0) throw ConfigError("grid step has the wrong sign");
        const int n = static_cast<int>(std::floor((b - a) / step + 1e-9));
        for (int i = 0; i <= n; ++i) out.push_back(a + i * step);
        return out;
    }
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    if (out.empty()) throw ConfigError("empty grid");
    return out;
}

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CsvWriter::Impl {
    std::ofstream os;
    std::size_t cols;
};

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header,
                     bool force)
    : impl_(new Impl) {
    if (!force && std::filesystem::exists(path))
        throw ConfigError("refusing to overwrite " + path + " (use --force)");
    impl_->os.open(path);
    if (!impl_->os) {
        delete impl_;
        throw std::runtime_error("cannot write " + path);
    }
    impl_->cols = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        impl_->os << header[i] << (i + 1 < header.size() ? "," : "\n");
}

void CsvWriter::row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
        impl_->os << num17(values[i]) << (i + 1 < values.size() ? "," : "\n");
}

void CsvWriter::row_mixed(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
        impl_->os << cells[i] << (i + 1 < cells.size() ? "," : "\n");
}

CsvWriter::~CsvWriter() {
    delete impl_;
}

void write_file(const std::string& path, const std::string& text, bool force) {
    if (!force && std::filesystem::exists(path))
        throw ConfigError("refusing to overwrite " + path + " (use --force)");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << text;
}

} // namespace patternforge
