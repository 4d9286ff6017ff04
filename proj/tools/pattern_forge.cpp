// pattern_forge: compute and certify periodic equilibrium patterns of the
// short-range/long-range interaction energy (modulated slabs, lamellae, and
// Bravais lattices of near-cylinders / near-spheres).

#include "CLI11.hpp"
#include "json.hpp"

#include "patternforge/bravais.hpp"
#include "patternforge/kernels.hpp"
#include "patternforge/lamellae.hpp"
#include "patternforge/lattice_patterns.hpp"
#include "patternforge/report.hpp"
#include "patternforge/slab_branch.hpp"
#include "patternforge/slab_operator.hpp"
#include "patternforge/slab_spectrum.hpp"
#include "patternforge/starshape.hpp"
#include "patternforge/threads.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

using namespace patternforge;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

std::string out_path(const RunConfig& c, const std::string& suffix) {
    std::filesystem::path p(c.out_dir);
    return (p / (c.file_prefix() + "_" + suffix)).string();
}

json base_report(const RunConfig& c) {
    json j;
    j["config"] = json::parse(config_to_json_text(c));
    j["threads"] = static_cast<int>(thread_count());
    return j;
}

void apply_thread_config(const RunConfig& c) {
    if (c.threads > 0) {
        setenv("PATTERN_FORGE_THREADS", std::to_string(c.threads).c_str(), 1);
    }
}

int run_verify(const RunConfig& c) {
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> up(0.05, 2.5);
    CsvWriter csv(out_path(c, "identities.csv"),
                  {"id", "kappa", "alpha", "beta", "delta", "lhs", "rhs", "residual"},
                  c.force);
    double worst = 0.0;
    json rows = json::array();
    for (int s = 0; s < c.samples; ++s) {
        double a = up(rng), b = up(rng), d = up(rng);
        auto rep = identity_suite(c.kappa, a, b, d);
        for (const auto& r : rep) {
            csv.row_mixed({r.id, num17(r.kappa), num17(r.alpha), num17(r.beta),
                           num17(r.delta), num17(r.lhs), num17(r.rhs), num17(r.residual)});
            worst = std::max(worst, r.residual);
            rows.push_back({{"id", r.id}, {"residual", r.residual}});
        }
    }
    json j = base_report(c);
    j["worst_residual"] = worst;
    j["pass"] = worst < 1e-8;
    j["identities"] = rows;
    write_file(out_path(c, "report.json"), j.dump(2), c.force);
    std::cout << "identity suite: " << c.samples << " samples, worst residual " << worst
              << (worst < 1e-8 ? " (pass)" : " (FAIL)") << "\n";
    return worst < 1e-8 ? 0 : kExitSolver;
}

int run_slab_spectrum(const RunConfig& c) {
    GammaWindow w = gamma_window(c.kappa);
    if (!w.nonempty) {
        std::cerr << "empty gamma window at kappa=" << c.kappa << ": computed ("
                  << w.lower << ", " << w.upper << ") has lower >= upper\n";
        return kExitConfig;
    }
    if (!(c.gamma > w.lower && c.gamma < w.upper)) {
        std::cerr << "gamma " << c.gamma << " outside the admissible window ("
                  << w.lower << ", " << w.upper << ")\n";
        return kExitConfig;
    }
    SpectrumReport rep = spectral_certificate({c.kappa, c.gamma}, c.ell_max);
    CsvWriter csv(out_path(c, "spectrum.csv"), {"ell", "sigma"}, c.force);
    for (const auto& [ell, sig] : rep.sigma_at) csv.row({double(ell), sig});
    json j = base_report(c);
    j["window"] = {{"lower", w.lower}, {"upper", w.upper}, {"nonempty", w.nonempty}};
    j["lambda_star"] = rep.lambda_star;
    j["kernel_simple"] = rep.kernel_simple;
    j["range_coercive"] = rep.range_coercive;
    j["transversal"] = rep.transversal;
    if (!rep.failure.empty()) j["failure"] = rep.failure;
    json st = json::object();
    for (const auto& [ell, sig] : rep.sigma_at) st[std::to_string(ell)] = sig;
    j["sigma"] = st;
    write_file(out_path(c, "report.json"), j.dump(2), c.force);
    std::cout << "lambda_star = " << rep.lambda_star << ", certificate "
              << (rep.kernel_simple && rep.range_coercive && rep.transversal ? "pass"
                                                                             : "FAIL")
              << "\n";
    return rep.kernel_simple && rep.range_coercive && rep.transversal ? 0 : kExitSolver;
}

void dump_shape(const RunConfig& c, const std::string& tag, double lambda,
                const CosSpectrum& v) {
    SymGrid g = synthesize(v, c.n_target);
    CsvWriter csv(out_path(c, "shape_" + tag + ".csv"), {"t1", "t2", "phi"}, c.force);
    for (int i = 0; i < g.n; ++i)
        for (int jj = 0; jj < g.n; ++jj)
            csv.row({g.coord(i), g.coord(jj), lambda + g.at(i, jj)});
    CsvWriter sc(out_path(c, "spectrum_" + tag + ".csv"), {"k1", "k2", "c"}, c.force);
    for (std::size_t i = 0; i < v.c.size(); ++i) {
        auto [k1, k2] = v.pair_at(i);
        sc.row({double(k1), double(k2), v.c[i]});
    }
}

SlabContext make_context(const RunConfig& c) {
    GammaWindow w = gamma_window(c.kappa);
    if (!w.nonempty) throw ConfigError("empty gamma window at this kappa");
    if (!(c.gamma > w.lower && c.gamma < w.upper))
        throw ConfigError("gamma outside the admissible window");
    QuadratureSpec q;
    q.n_target = c.n_target;
    q.n_quad = c.n_quad;
    const double ls = lambda_star({c.kappa, c.gamma});
    return SlabContext({c.kappa, c.gamma}, q, 0.55 * ls, 1.6 * ls);
}

int run_slab_branch(const RunConfig& c) {
    SlabContext ctx = make_context(c);
    SolverOptions opt;
    opt.kmax = c.kband;
    Branch br = continue_branch(ctx, c.s_grid, opt);
    CsvWriter csv(out_path(c, "branch.csv"),
                  {"s", "lambda_s", "v_norm2", "residual_inf", "H_value"}, c.force);
    for (const auto& p : br.points)
        csv.row({p.s, p.lambda_s, p.v_norm2, p.residual_inf, p.h_value});
    json j = base_report(c);
    j["lambda_star"] = br.points.empty() ? 0.0 : br.points[0].lambda_s;
    j["points"] = br.points.size();
    if (!br.diagnostic.empty()) j["diagnostic"] = br.diagnostic;
    write_file(out_path(c, "report.json"), j.dump(2), c.force);
    if (c.dump_shapes)
        for (const auto& p : br.points) {
            CosSpectrum u = p.v;
            u.at(0, 1) += 2.0 * M_PI;
            for (double& x : u.c) x *= p.s;
            std::ostringstream tag;
            tag << "s" << p.s;
            dump_shape(c, tag.str(), p.lambda_s, u);
        }
    std::cout << "branch: " << br.points.size() << " points, lambda_0 = "
              << (br.points.empty() ? 0.0 : br.points[0].lambda_s) << "\n";
    if (!br.diagnostic.empty()) {
        std::cerr << br.diagnostic << "\n";
        return kExitSolver;
    }
    return 0;
}

int run_lamellae(const RunConfig& c) {
    SlabContext ctx = make_context(c);
    SolverOptions opt;
    opt.kmax = c.kband;
    const double ls = lambda_star(ctx.params);
    BranchPoint seed = solve_at_s(ctx, c.s_value, ls, CosSpectrum(opt.kmax), opt);
    CsvWriter csv(out_path(c, "lamellae.csv"),
                  {"epsilon", "s", "delta", "lambda_eps_s", "residual_inf"}, c.force);
    json pts = json::array();
    for (double eps : c.eps_grid) {
        LamellaePoint p;
        if (eps == 0.0) {
            p.epsilon = 0.0;
            p.s = c.s_value;
            p.delta = seed.lambda_s / ls;
            p.lambda_eps_s = seed.lambda_s;
            p.v = seed.v;
            p.residual_inf = seed.residual_inf;
        } else {
            p = solve_lamellae(ctx, eps, c.s_value, seed.lambda_s / ls, seed.v, opt);
        }
        csv.row({p.epsilon, p.s, p.delta, p.lambda_eps_s, p.residual_inf});
        pts.push_back({{"epsilon", p.epsilon},
                       {"delta", p.delta},
                       {"residual_inf", p.residual_inf}});
        if (c.dump_shapes) {
            CosSpectrum u = p.v;
            u.at(0, 1) += 2.0 * M_PI;
            for (double& x : u.c) x *= c.s_value;
            std::ostringstream tag;
            tag << "eps" << eps;
            dump_shape(c, tag.str(), p.lambda_eps_s, u);
        }
    }
    json j = base_report(c);
    j["lambda_star"] = ls;
    j["points"] = pts;
    write_file(out_path(c, "report.json"), j.dump(2), c.force);
    std::cout << "lamellae: " << c.eps_grid.size() << " points at s = " << c.s_value
              << "\n";
    return 0;
}

BravaisLattice lattice_from_config(const RunConfig& c) {
    if (!c.basis.empty()) {
        BravaisLattice l;
        l.N = c.n_dim;
        l.M = static_cast<int>(c.basis.size());
        l.basis = c.basis;
        l.validate();
        return l;
    }
    if (c.m_dim == 0) return BravaisLattice::empty(c.n_dim);
    if (c.m_dim == 1) return BravaisLattice::line(c.n_dim);
    if (c.m_dim == 2) return BravaisLattice::square(c.n_dim);
    return BravaisLattice::cubic();
}

int run_lattice(const RunConfig& c) {
    BravaisLattice lat = lattice_from_config(c);
    LatticeSpectrum sp = gamma_n(c.n_dim, c.kappa, c.k_max);
    const double gamma = c.gamma_frac > 0.0 ? c.gamma_frac * sp.gamma_n : c.gamma;
    if (!(gamma > 0.0 && gamma < sp.gamma_n))
        throw ConfigError("lattice: gamma must lie in (0, gamma_N)");

    StarBasis basis = c.n_dim == 2 ? StarBasis(2, 256) : StarBasis(3, 24, 48);
    json j = base_report(c);
    j["gamma_n"] = sp.gamma_n;
    j["gamma_used"] = gamma;
    j["mu"] = sp.mu;
    json sig = json::array();
    for (int k = 0; k <= sp.k_max; ++k) sig.push_back(sp.sigma(gamma, k));
    j["sigma"] = sig;
    j["tail_bound"] = sp.tail_bound;
    j["tail_certified"] = sp.tail_certified;

    json runs = json::array();
    for (double eps : c.eps_grid) {
        json run;
        run["epsilon"] = eps;
        auto nc = nonconstancy_metrics(c.n_dim, lat, c.kappa, eps);
        run["nonconstancy"] = {{"aligned", nc.aligned},
                               {"perpendicular", nc.perpendicular},
                               {"ratio", nc.ratio},
                               {"verdict", nc.verdict}};
        auto sol = newton_lattice_solve(basis, lat, c.kappa, gamma, eps, sp, c.kband);
        run["residual_inf"] = sol.residual_inf;
        run["deviation_inf"] = sol.deviation_inf;
        run["newton_iters"] = sol.newton_iters;
        if (lat.M < c.n_dim && eps > 0.0) {
            StarShape fo = first_order_shape(basis, lat, c.kappa, gamma, eps, sp, c.kband);
            std::vector<double> fg = basis.synth(fo.coeff);
            double dev = 0.0;
            for (double v : fg) dev = std::max(dev, std::abs(v - 1.0));
            run["first_order_deviation"] = dev;
        }
        json coeffs = json::array();
        for (double v : sol.shape.coeff) coeffs.push_back(v);
        run["shape_coeff"] = coeffs;
        runs.push_back(run);

        std::ostringstream tag;
        tag << "eps" << eps << "_shape.csv";
        if (c.n_dim == 2) {
            CsvWriter csv(out_path(c, tag.str()), {"theta", "phi"}, c.force);
            std::vector<double> g = basis.synth(sol.shape.coeff);
            for (std::size_t i = 0; i < basis.grid_size(); ++i) {
                auto d = basis.dir(i);
                csv.row({std::atan2(d[1], d[0]), g[i]});
            }
        } else {
            CsvWriter csv(out_path(c, tag.str()), {"x", "y", "z", "phi"}, c.force);
            std::vector<double> g = basis.synth(sol.shape.coeff);
            for (std::size_t i = 0; i < basis.grid_size(); ++i) {
                auto d = basis.dir(i);
                csv.row({d[0], d[1], d[2], g[i]});
            }
        }
    }
    j["runs"] = runs;
    write_file(out_path(c, "report.json"), j.dump(2), c.force);
    std::cout << "lattice: gamma_N = " << sp.gamma_n << ", gamma = " << gamma << ", "
              << c.eps_grid.size() << " epsilon values\n";
    return 0;
}

int dispatch(const RunConfig& c) {
    apply_thread_config(c);
    c.validate();
    std::filesystem::create_directories(c.out_dir);
    if (c.task == "verify") return run_verify(c);
    if (c.task == "slab-spectrum") return run_slab_spectrum(c);
    if (c.task == "slab-branch") return run_slab_branch(c);
    if (c.task == "lamellae") return run_lamellae(c);
    return run_lattice(c);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"periodic equilibrium patterns of the screened-interaction energy"};
    app.require_subcommand(0, 1);

    RunConfig cfg;
    std::string config_path, s_grid_text, eps_grid_text, basis_text;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--kappa", cfg.kappa, "screening parameter");
        sub->add_option("--gamma", cfg.gamma, "long-range coupling");
        sub->add_option("--out-dir", cfg.out_dir, "output directory");
        sub->add_option("--threads", cfg.threads, "worker count (0 = auto)");
        sub->add_option("--n-target", cfg.n_target, "evaluation grid per axis");
        sub->add_option("--n-quad", cfg.n_quad, "fine quadrature grid per axis");
        sub->add_option("--kband", cfg.kband, "shape band");
        sub->add_flag("--force", cfg.force, "overwrite existing outputs");
        sub->add_flag("--dump-shapes", cfg.dump_shapes, "write per-point shape files");
    };

    CLI::App* verify = app.add_subcommand("verify", "kernel integral identity suite");
    add_common(verify);
    verify->add_option("--samples", cfg.samples, "random parameter draws");
    verify->add_option("--seed", cfg.seed, "RNG seed");

    CLI::App* spec = app.add_subcommand("slab-spectrum", "window, lambda*, certificate");
    add_common(spec);
    spec->add_option("--ell-max", cfg.ell_max, "spectrum table size");

    CLI::App* branch = app.add_subcommand("slab-branch", "modulated-slab branch");
    add_common(branch);
    branch->add_option("--s", s_grid_text, "amplitude grid start:end:step or list")
        ->required();

    CLI::App* lam = app.add_subcommand("lamellae", "periodic stack continuation");
    add_common(lam);
    lam->add_option("--s-value", cfg.s_value, "branch amplitude s");
    lam->add_option("--epsilon", eps_grid_text, "epsilon grid")->required();

    CLI::App* lat = app.add_subcommand("lattice", "near-cylinder / near-sphere lattices");
    add_common(lat);
    lat->add_option("--n-dim", cfg.n_dim, "ambient dimension (2 = cylinders, 3 = spheres)");
    lat->add_option("--m-dim", cfg.m_dim, "lattice rank");
    lat->add_option("--basis", basis_text, "basis rows 'x,y[,z];x,y[,z]'");
    lat->add_option("--epsilon", eps_grid_text, "epsilon grid")->required();
    lat->add_option("--k-max", cfg.k_max, "spectrum table size");
    lat->add_option("--gamma-frac", cfg.gamma_frac, "gamma as a fraction of gamma_N");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot read config file " + config_path);
            std::stringstream ss;
            ss << in.rdbuf();
            RunConfig file_cfg = config_from_json_text(ss.str());
            // explicit flags override file values where provided
            RunConfig merged = file_cfg;
            for (CLI::App* sub : {verify, spec, branch, lam, lat}) {
                if (!sub->parsed()) continue;
                merged.task = file_cfg.task;
                auto maybe = [&](const char* name, auto& dst, auto& src) {
                    if (sub->count(name)) dst = src;
                };
                maybe("--kappa", merged.kappa, cfg.kappa);
                maybe("--gamma", merged.gamma, cfg.gamma);
                maybe("--out-dir", merged.out_dir, cfg.out_dir);
                maybe("--threads", merged.threads, cfg.threads);
                maybe("--n-target", merged.n_target, cfg.n_target);
                maybe("--n-quad", merged.n_quad, cfg.n_quad);
                maybe("--kband", merged.kband, cfg.kband);
                if (sub->count("--force")) merged.force = cfg.force;
                if (sub->count("--dump-shapes")) merged.dump_shapes = cfg.dump_shapes;
            }
            cfg = merged;
        } else {
            if (verify->parsed())
                cfg.task = "verify";
            else if (spec->parsed())
                cfg.task = "slab-spectrum";
            else if (branch->parsed())
                cfg.task = "slab-branch";
            else if (lam->parsed())
                cfg.task = "lamellae";
            else if (lat->parsed())
                cfg.task = "lattice";
            else {
                std::cerr << app.help() << "\n";
                return kExitConfig;
            }
        }
        if (!s_grid_text.empty()) cfg.s_grid = parse_grid(s_grid_text);
        if (!eps_grid_text.empty()) cfg.eps_grid = parse_grid(eps_grid_text);
        if (!basis_text.empty()) {
            cfg.basis.clear();
            std::istringstream rows(basis_text);
            std::string row;
            while (std::getline(rows, row, ';')) {
                auto comps = parse_grid(row);
                std::array<double, 3> b = {0.0, 0.0, 0.0};
                for (std::size_t i = 0; i < comps.size() && i < 3; ++i) b[i] = comps[i];
                cfg.basis.push_back(b);
            }
            cfg.m_dim = static_cast<int>(cfg.basis.size());
        }
        return dispatch(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    }
}
