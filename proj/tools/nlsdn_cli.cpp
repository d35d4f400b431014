#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "nlsdn/harness.hpp"

using namespace nlsdn;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string level = "fast";
};

void add_common(CLI::App* app, Common& c, bool need_config) {
    auto* o = app->add_option("--config", c.config, "scenario file (JSON)");
    if (need_config) o->required()->check(CLI::ExistingFile);
    app->add_option("--out", c.out, "output directory")->capture_default_str();
    app->add_option("--seed", c.seed, "noise seed, overrides the config");
    app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--level", c.level, "fast or full")->check(CLI::IsMember({"fast", "full"}))->capture_default_str();
}

Scenario load(const Common& c) {
    Scenario sc = load_scenario(c.config);
    if (c.seed) sc.seed = *c.seed;
    sc.threads = c.threads;
    return sc;
}

void write_file(const Common& c, const std::string& name, const std::string& body) {
    fs::create_directories(c.out);
    std::ofstream out(fs::path(c.out) / name);
    out << body;
    std::cout << "wrote " << (fs::path(c.out) / name).string() << "\n";
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double a = std::log(x[i]), b = std::log(y[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

GOProbe go_probe(const Scenario& sc, const GridPtr& g, const Vec3& omega, bool modulated) {
    GOSpec s;
    s.omega = omega;
    s.rho = sc.probes.rho;
    s.flavor = modulated ? GOSpec::Flavor::Modulated : GOSpec::Flavor::Plain;
    s.tau = sc.probes.tau;
    s.xi = sc.probes.xi;
    s.h = sc.probes.h;
    s.N = sc.probes.N;
    s.T_star = sc.constants.T_star;
    return build_go(s, sc.q, g);
}

BeamSpec beam_spec(const Scenario& sc, double rho) {
    BeamSpec b;
    b.p = sc.probes.p;
    b.omega = sc.probes.omega;
    b.eta = sc.probes.eta;
    b.rho = rho;
    b.n_phase = sc.domain.n == 3 ? 2 : std::max(2, sc.probes.N);
    b.n_amp = sc.domain.n == 3 ? 0 : 1;
    b.iota = TimePlateau(sc.probes.iota_h, sc.grid.T);
    return b;
}

BoundaryData probe_trace(const Scenario& sc, const GridPtr& g) {
    BoundaryData f;
    if (sc.probes.kind == "beam")
        f = build_beam(beam_spec(sc, sc.probes.local_rho), sc.q, sc.domain).trace(g);
    else
        f = go_probe(sc, g, sc.probes.omega, sc.probes.flavor == "modulated").trace(g);
    f *= sc.probes.amplitude;
    return f;
}

int simulate_dn(const Common& c) {
    Scenario sc = load(c);
    GridPtr g = sc.make_grid_ptr();
    BoundaryData f = probe_trace(sc, g);
    Model m1{g, sc.q, sc.beta, sc.gamma, sc.solver_options()};
    NeumannTrace tr = m1.dn(f);
    if (sc.beta2) tr -= Model{g, sc.q, *sc.beta2, sc.gamma, sc.solver_options()}.dn(f);
    tr = inject_noise(tr, sc.noise_delta, content_seed(sc.seed, f));
    DNDataset d = DNDataset::from_trace(tr, sc, sc.probes.kind + ":" + sc.probes.flavor, {sc.probes.amplitude}, sc.noise_delta, sc.seed);
    fs::create_directories(c.out);
    std::string path = (fs::path(c.out) / "dn.nlsdn").string();
    d.write(path);
    std::cout << "wrote " << path << "\n";
    // re-read to prove the file is self-consistent
    std::string again = DNDataset::read(path).serialize();
    json s = {{"dataset", path},
              {"levels", g->time_levels()},
              {"slots", tr.count()},
              {"trace_l2", tr.l2_norm()},
              {"data_l2", f.l2_norm()},
              {"round_trip_identical", again == d.serialize()}};
    write_file(c, "simulate_dn.json", s.dump(2) + "\n");
    return 0;
}

int probe_cmd(const Common& c) {
    Scenario sc = load(c);
    GridPtr g = sc.make_grid_ptr();
    std::vector<double> rhos = sc.probes.rho_sweep;
    std::string csv;
    json s;
    if (sc.probes.kind == "beam") {
        if (rhos.empty()) rhos.push_back(sc.probes.local_rho);
        csv = "rho,residual_l2,residual_h1_time,c0\n";
        std::vector<double> xs, ys;
        for (double r : rhos) {
            Beam b = build_beam(beam_spec(sc, r), sc.q, sc.domain);
            char line[200];
            try {
                BeamResidual res = beam_residual(b, sc.q, g);
                std::snprintf(line, sizeof line, "%.6g,%.10g,%.10g,%.6g\n", r, res.l2, res.h1_time, b.imag_lower_bound());
                xs.push_back(r);
                ys.push_back(res.l2);
            } catch (const ResolutionError& e) {
                std::cerr << "rho " << r << ": " << e.what() << "\n";
                std::snprintf(line, sizeof line, "%.6g,nan,nan,%.6g\n", r, b.imag_lower_bound());
            }
            csv += line;
        }
        BoundaryData tr = build_beam(beam_spec(sc, rhos.front()), sc.q, sc.domain).trace(g);
        s["trace_outside_gamma"] = tr.max_outside(sc.gamma) / std::max(tr.max_abs(), 1e-300);
        if (xs.size() > 1) s["residual_slope"] = fit_slope(xs, ys);
    } else {
        if (rhos.empty()) rhos.push_back(sc.probes.rho);
        csv = "rho,r_l2,v_l2,ratio,discrete_residual\n";
        std::vector<double> xs, ys;
        for (double r : rhos) {
            Scenario s2 = sc;
            s2.probes.rho = r;
            bool mod = sc.probes.flavor == "modulated";
            SpaceTimeField v = go_probe(s2, g, sc.probes.omega, mod).sample(g);
            Completion comp = complete_to_solution(v, sc.q, mod ? Direction::Adjoint : Direction::Forward, sc.solver_options().linear);
            double res = discrete_residual(comp.U, sc.q, nullptr, mod ? Direction::Adjoint : Direction::Forward);
            char line[200];
            std::snprintf(line, sizeof line, "%.6g,%.10g,%.10g,%.6g,%.3g\n", r, comp.r_l2, comp.v_l2, comp.r_l2 / comp.v_l2, res);
            csv += line;
            xs.push_back(r);
            ys.push_back(comp.r_l2 / comp.v_l2);
        }
        if (xs.size() > 1) s["remainder_slope"] = fit_slope(xs, ys);
    }
    write_file(c, "probe.csv", csv);
    write_file(c, "probe.json", s.dump(2) + "\n");
    return 0;
}

int linearize_cmd(const Common& c) {
    Scenario sc = load(c);
    GridPtr g = sc.make_grid_ptr();
    const LinearOptions lin = sc.solver_options().linear;
    BoundaryData f1 = go_probe(sc, g, sc.probes.omega, false).trace(g);
    BoundaryData f2 = go_probe(sc, g, sc.probes.omega2, false).trace(g);
    Model m{g, sc.q, sc.truth(), sc.gamma, sc.solver_options()};
    DNEvaluator dn = [&](const BoundaryData& f) { return m.dn(f); };
    auto U1 = solve_linear(g, sc.q, &f1, nullptr, Direction::Forward, lin);
    auto U2 = solve_linear(g, sc.q, &f2, nullptr, Direction::Forward, lin);
    NeumannTrace oracle = neumann_trace(solve_w(sc.q, sc.truth(), U1, U2, lin), sc.gamma);
    std::vector<double> eps = sc.probes.eps_sweep;
    if (eps.empty()) eps = {sc.probes.eps};
    std::string csv = "eps,d2_l2,oracle_l2,error_l2\n";
    std::vector<double> errs;
    if (c.level == "full") fs::create_directories(c.out);
    for (double e : eps) {
        auto r = second_difference_dn(dn, f1, f2, e, e);
        double err = (r.d2 - oracle).l2_norm();
        errs.push_back(err);
        char line[200];
        std::snprintf(line, sizeof line, "%.6g,%.10g,%.10g,%.10g\n", e, r.d2.l2_norm(), oracle.l2_norm(), err);
        csv += line;
        if (c.level == "full") {
            DNDataset d = DNDataset::from_trace(r.d2, sc, "d2", {e, e}, 0.0, sc.seed);
            d.write((fs::path(c.out) / ("d2_" + std::to_string(e) + ".nlsdn")).string());
        }
    }
    write_file(c, "linearize.csv", csv);
    json s;
    if (eps.size() > 1) s["eps_slope"] = fit_slope(eps, errs);
    write_file(c, "linearize.json", s.dump(2) + "\n");
    return 0;
}

int local_cmd(const Common& c) {
    Scenario sc = load(c);
    if (sc.probes.points.empty()) throw ConfigError("config: probes.points: local recovery needs at least one point");
    RunOptions ro;
    ro.out_dir = c.out;
    ro.threads = c.threads;
    auto res = run_local(sc, ro);
    for (const auto& r : res) {
        if (r.accepted)
            std::printf("p=(%g,%g,%g) estimate %.6f%+.6fi truth %.6f\n", r.p[0], r.p[1], r.p[2], r.est.estimate.real(),
                        r.est.estimate.imag(), r.truth);
        else
            std::printf("p=(%g,%g,%g) rejected: %s\n", r.p[0], r.p[1], r.p[2], r.reason.c_str());
    }
    return 0;
}

int fourier_cmd(const Common& c, bool sweep) {
    Scenario sc = load(c);
    if (!sweep) sc.sweep.deltas.clear();
    if (sweep && sc.sweep.deltas.empty()) throw ConfigError("config: sweep.deltas: a stability sweep needs noise levels");
    RunOptions ro;
    ro.out_dir = c.out;
    ro.threads = c.threads;
    ro.write_datasets = c.level == "full";
    auto res = run_scenario(sc, ro);
    for (const auto& r : res.runs)
        std::printf("delta %.3e  l2 error %.6e  relative %.4f  (%.1f s)\n", r.row.delta, r.row.l2_error, r.error.rel(), r.row.runtime_s);
    if (sweep) std::printf("spearman %.3f  monotone %s\n", res.spearman_rho, res.monotone ? "yes" : "no");
    for (const auto& a : res.artifacts) std::cout << "wrote " << a << "\n";
    return 0;
}

int verify_cmd(const Common& c) {
    VerifyOptions vo;
    vo.level = c.level;
    vo.threads = c.threads;
    VerifyReport rep = verify_suite(vo);
    std::cout << rep.text();
    write_file(c, "verify.txt", rep.text());
    write_file(c, "verify.json", rep.to_json().dump(2) + "\n");
    return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inverse problems for the quadratic Schrodinger equation: simulation and reconstruction"};
    app.require_subcommand(1);
    Common c;
    struct Sub {
        const char* name;
        const char* help;
        bool need_config;
    };
    const Sub subs[] = {{"simulate-dn", "evaluate the DN map on the configured probe and write a dataset", true},
                        {"probe", "build GO or beam probes and report remainders", true},
                        {"linearize", "second difference of the DN map against the W oracle", true},
                        {"reconstruct-local", "pointwise recovery with intersecting beams", true},
                        {"reconstruct-fourier", "Fourier-sample reconstruction at one noise level", true},
                        {"stability-sweep", "reconstruction error over the configured noise levels", true},
                        {"verify", "run the invariant suite", false}};
    std::map<std::string, CLI::App*> cmd;
    for (const auto& s : subs) {
        cmd[s.name] = app.add_subcommand(s.name, s.help);
        add_common(cmd[s.name], c, s.need_config);
    }
    CLI11_PARSE(app, argc, argv);
    try {
        if (cmd["simulate-dn"]->parsed()) return simulate_dn(c);
        if (cmd["probe"]->parsed()) return probe_cmd(c);
        if (cmd["linearize"]->parsed()) return linearize_cmd(c);
        if (cmd["reconstruct-local"]->parsed()) return local_cmd(c);
        if (cmd["reconstruct-fourier"]->parsed()) return fourier_cmd(c, false);
        if (cmd["stability-sweep"]->parsed()) return fourier_cmd(c, true);
        if (cmd["verify"]->parsed()) return verify_cmd(c);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
