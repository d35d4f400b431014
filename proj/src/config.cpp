#include <fstream>
#include <sstream>

#include "nlsdn/harness.hpp"

namespace nlsdn {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ConfigError("config: " + path + ": " + msg); }

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) fail(join(path, it.key()), "unknown field");
    }
}

double num(const json& j, const std::string& path, const char* key, double def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number()) fail(join(path, key), "expected a number");
    return v.get<double>();
}

double num_req(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) fail(join(path, key), "missing required field");
    return num(j, path, key, 0);
}

int integer(const json& j, const std::string& path, const char* key, int def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
    return v.get<int>();
}

std::string str(const json& j, const std::string& path, const char* key, const std::string& def) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_string()) fail(join(path, key), "expected a string");
    return v.get<std::string>();
}

std::vector<double> num_list(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

Vec3 vec(const json& v, const std::string& path, int n) {
    auto a = num_list(v, path);
    if (static_cast<int>(a.size()) != n) fail(path, "expected " + std::to_string(n) + " components");
    Vec3 x = Vec3::Zero();
    for (int d = 0; d < n; ++d) x[d] = a[d];
    return x;
}

cplx complex_value(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    auto a = num_list(v, path);
    if (a.size() != 2) fail(path, "expected a number or [re, im]");
    return {a[0], a[1]};
}

std::function<double(double)> time_factor(const json& j, const std::string& path, double T) {
    if (!j.contains("time")) return [](double) { return 1.0; };
    const json& t = j.at("time");
    const std::string p = join(path, "time");
    if (t.is_string()) {
        const std::string s = t.get<std::string>();
        if (s == "one") return [](double) { return 1.0; };
        if (s == "sin2")
            return [T](double x) {
                double v = std::sin(kPi * x / T);
                return v * v;
            };
        if (s == "sin4")
            return [T](double x) {
                double v = std::sin(kPi * x / T);
                return v * v * v * v;
            };
        fail(p, "unknown time profile '" + s + "' (one, sin2, sin4, {\"plateau\": h})");
    }
    check_keys(t, p, {"plateau"});
    double h = num_req(t, p, "plateau");
    try {
        TimePlateau th(h, T);
        return [th](double x) { return th(x); };
    } catch (const GeometryError& e) {
        fail(join(p, "plateau"), e.what());
    }
}

}  // namespace

json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
    }
}

Potential make_potential(const json& j, const std::string& path, const Domain& dom, double T) {
    if (j.is_number() || j.is_array()) return Potential::uniform(complex_value(j, path));
    if (!j.is_object()) fail(path, "expected a potential object");
    const std::string type = str(j, path, "type", "");
    const int n = dom.n;
    if (type == "zero") {
        check_keys(j, path, {"type"});
        return Potential::zero();
    }
    if (type == "constant") {
        check_keys(j, path, {"type", "value"});
        if (!j.contains("value")) fail(join(path, "value"), "missing required field");
        return Potential::uniform(complex_value(j.at("value"), join(path, "value")));
    }
    if (type == "bump") {
        check_keys(j, path, {"type", "center", "radius", "width", "amplitude", "time"});
        if (!j.contains("center")) fail(join(path, "center"), "missing required field");
        Vec3 c = vec(j.at("center"), join(path, "center"), n);
        double r = num_req(j, path, "radius");
        double w = num(j, path, "width", r / 5);
        double a = num(j, path, "amplitude", 1.0);
        if (!(r > 0) || !(w > 0)) fail(path, "radius and width must be positive");
        auto tf = time_factor(j, path, T);
        bool tind = !j.contains("time") || (j.at("time").is_string() && j.at("time") == "one");
        Potential p = Potential::from_function(
            [=](double t, const Vec3& x) { return cplx(a * tf(t) * smooth_step((r - (x - c).head(n).norm()) / w)); }, tind, true,
            std::abs(a) * (1 + 1e-9));
        p.label = "bump";
        return p;
    }
    if (type == "separable") {
        check_keys(j, path, {"type", "amplitude", "time", "space"});
        double a = num(j, path, "amplitude", 1.0);
        // space profile: "sin2", "one", or {"cosine": {"axis", "k", "depth"}} = 1 + depth cos(2πk x_axis / L)
        std::string sp = "sin2";
        int axis = 0;
        double k = 1, depth = 0.5;
        if (j.contains("space") && j.at("space").is_object()) {
            const std::string cp = join(join(path, "space"), "cosine");
            check_keys(j.at("space"), join(path, "space"), {"cosine"});
            if (!j.at("space").contains("cosine")) fail(cp, "missing required field");
            const json& c = j.at("space").at("cosine");
            check_keys(c, cp, {"axis", "k", "depth"});
            sp = "cosine";
            axis = static_cast<int>(num(c, cp, "axis", 0));
            k = num(c, cp, "k", 1);
            depth = num(c, cp, "depth", 0.5);
            if (axis < 0 || axis >= n) fail(join(cp, "axis"), "axis out of range");
        } else {
            sp = str(j, path, "space", "sin2");
            if (sp != "sin2" && sp != "one") fail(join(path, "space"), "unknown space profile '" + sp + "' (sin2, one, {\"cosine\": ...})");
        }
        if (sp != "one" && dom.kind != Domain::Kind::Box) fail(join(path, "space"), sp + " profile needs a box domain");
        auto tf = time_factor(j, path, T);
        auto L = dom.lengths;
        bool tind = !j.contains("time") || (j.at("time").is_string() && j.at("time") == "one");
        double bound = std::abs(a) * (sp == "cosine" ? 1 + std::abs(depth) : 1.0);
        Potential p = Potential::from_function(
            [=](double t, const Vec3& x) {
                double s = 1;
                if (sp == "sin2")
                    for (int d = 0; d < n; ++d) {
                        double v = std::sin(kPi * x[d] / L[d]);
                        s *= v * v;
                    }
                else if (sp == "cosine")
                    s = 1 + depth * std::cos(2 * kPi * k * x[axis] / L[axis]);
                return cplx(a * tf(t) * s);
            },
            tind, true, bound * (1 + 1e-9));
        p.label = "separable";
        return p;
    }
    fail(join(path, "type"), "unknown potential type '" + type + "' (zero, constant, bump, separable)");
}

BoundaryPatch make_patch(const json& j, const std::string& path, const Domain& dom) {
    if (j.is_string()) {
        if (j.get<std::string>() == "full") return BoundaryPatch::full();
        fail(path, "expected \"full\" or a patch object");
    }
    check_keys(j, path, {"faces", "exclude", "cap"});
    BoundaryPatch g;
    if (j.contains("faces")) {
        const json& f = j.at("faces");
        if (!f.is_array()) fail(join(path, "faces"), "expected an array of face indices");
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (!f[i].is_number_integer() || f[i].get<int>() < 0 || f[i].get<int>() >= 2 * dom.n)
                fail(join(path, "faces") + "[" + std::to_string(i) + "]", "face index out of range");
            g.faces.push_back(f[i].get<int>());
        }
    }
    if (j.contains("exclude")) {
        const json& e = j.at("exclude");
        if (!e.is_array()) fail(join(path, "exclude"), "expected an array of boxes");
        for (std::size_t i = 0; i < e.size(); ++i) {
            std::string p = join(path, "exclude") + "[" + std::to_string(i) + "]";
            check_keys(e[i], p, {"lo", "hi"});
            if (!e[i].contains("lo") || !e[i].contains("hi")) fail(p, "box needs lo and hi");
            g.exclude(vec(e[i].at("lo"), join(p, "lo"), dom.n), vec(e[i].at("hi"), join(p, "hi"), dom.n));
        }
    }
    if (j.contains("cap")) {
        std::string p = join(path, "cap");
        check_keys(j.at("cap"), p, {"direction", "cos"});
        if (!j.at("cap").contains("direction")) fail(join(p, "direction"), "missing required field");
        g.cap_direction = vec(j.at("cap").at("direction"), join(p, "direction"), dom.n);
        g.cap_cos = num(j.at("cap"), p, "cos", 0.0);
    }
    return g;
}

Scenario parse_scenario(const json& j) {
    check_keys(j, "", {"name", "seed", "threads", "noise_delta", "domain", "grid", "gamma_patch", "q", "beta", "probes",
                       "schedule_constants", "sweep", "complement_margin"});
    Scenario sc;
    sc.source = j;
    sc.name = str(j, "", "name", "scenario");
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) fail("seed", "expected a non-negative integer");
        sc.seed = j.at("seed").get<std::uint64_t>();
    }
    sc.threads = integer(j, "", "threads", 1);
    sc.noise_delta = num(j, "", "noise_delta", 0.0);
    if (sc.noise_delta < 0) fail("noise_delta", "must be nonnegative");
    if (j.contains("complement_margin")) {
        sc.complement_margin = num(j, "", "complement_margin", 0.0);
        if (!(*sc.complement_margin > 0)) fail("complement_margin", "must be positive");
    }

    if (j.contains("domain")) {
        const json& d = j.at("domain");
        check_keys(d, "domain", {"kind", "lengths", "n", "radius"});
        std::string kind = str(d, "domain", "kind", "box");
        try {
            if (kind == "box")
                sc.domain = Domain::box(d.contains("lengths") ? num_list(d.at("lengths"), "domain.lengths") : std::vector<double>{1, 1});
            else if (kind == "ball")
                sc.domain = Domain::ball(integer(d, "domain", "n", 2), num(d, "domain", "radius", 1.0));
            else
                fail("domain.kind", "unknown domain kind '" + kind + "' (box, ball)");
        } catch (const GeometryError& e) {
            fail("domain", e.what());
        }
    }
    const int n = sc.domain.n;

    sc.grid.cells.assign(n, 48);
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        check_keys(g, "grid", {"cells", "T", "steps", "backend"});
        if (g.contains("cells")) {
            const json& c = g.at("cells");
            if (c.is_number_integer())
                sc.grid.cells.assign(n, c.get<int>());
            else {
                auto v = num_list(c, "grid.cells");
                if (static_cast<int>(v.size()) != n) fail("grid.cells", "expected one count per axis");
                for (int d = 0; d < n; ++d) sc.grid.cells[d] = static_cast<int>(v[d]);
            }
        }
        sc.grid.T = num(g, "grid", "T", 1.0);
        sc.grid.steps = integer(g, "grid", "steps", 400);
        std::string be = str(g, "grid", "backend", "auto");
        if (be == "auto")
            sc.grid.backend = LinearOptions::Backend::Auto;
        else if (be == "spectral")
            sc.grid.backend = LinearOptions::Backend::Spectral;
        else if (be == "sparse")
            sc.grid.backend = LinearOptions::Backend::Sparse;
        else
            fail("grid.backend", "unknown backend '" + be + "' (auto, spectral, sparse)");
        if (!(sc.grid.T > 0) || sc.grid.steps < 1) fail("grid", "T and steps must be positive");
        for (int c : sc.grid.cells)
            if (c < 4) fail("grid.cells", "at least 4 cells per axis");
    }
    const double T = sc.grid.T;

    if (j.contains("gamma_patch")) sc.gamma = make_patch(j.at("gamma_patch"), "gamma_patch", sc.domain);
    if (j.contains("q")) sc.q = make_potential(j.at("q"), "q", sc.domain, T);
    if (j.contains("beta")) {
        const json& b = j.at("beta");
        if (b.is_object() && b.contains("pair")) {
            check_keys(b, "beta", {"pair"});
            const json& pr = b.at("pair");
            if (!pr.is_array() || pr.size() != 2) fail("beta.pair", "expected two potentials");
            sc.beta = make_potential(pr[0], "beta.pair[0]", sc.domain, T);
            sc.beta2 = make_potential(pr[1], "beta.pair[1]", sc.domain, T);
        } else {
            sc.beta = make_potential(b, "beta", sc.domain, T);
        }
    }

    ProbeConfig& pc = sc.probes;
    pc.L_per = Vec3::Zero();
    pc.omega = Vec3::Zero();
    pc.omega[0] = 1;
    pc.omega2 = Vec3::Zero();
    pc.omega2[1] = 1;
    pc.p = sc.domain.kind == Domain::Kind::Box ? Vec3(0.5 * sc.domain.lengths[0], 0.5 * sc.domain.lengths[1], 0.5 * sc.domain.lengths[2])
                                              : Vec3::Zero();
    if (n == 2) pc.p[2] = 0;
    if (j.contains("probes")) {
        const json& p = j.at("probes");
        const std::string P = "probes";
        check_keys(p, P, {"kind", "rho", "h", "M", "N", "scale", "reference_delta", "T_per", "L_per", "points", "local_rho", "eta",
                          "iota_h", "eps", "cal_radius", "omega", "omega2", "flavor", "tau", "xi", "p", "amplitude", "rho_sweep",
                          "eps_sweep"});
        pc.kind = str(p, P, "kind", pc.kind);
        if (pc.kind != "fourier" && pc.kind != "local" && pc.kind != "go" && pc.kind != "beam")
            fail("probes.kind", "unknown probe kind '" + pc.kind + "' (fourier, local, go, beam)");
        pc.rho = num(p, P, "rho", pc.rho);
        pc.h = num(p, P, "h", pc.h);
        pc.M = num(p, P, "M", pc.M);
        pc.N = integer(p, P, "N", pc.N);
        pc.scale = num(p, P, "scale", pc.scale);
        pc.reference_delta = num(p, P, "reference_delta", pc.reference_delta);
        pc.T_per = num(p, P, "T_per", 0.0);
        if (p.contains("L_per")) pc.L_per = vec(p.at("L_per"), "probes.L_per", n);
        if (p.contains("points")) {
            const json& pts = p.at("points");
            if (!pts.is_array()) fail("probes.points", "expected an array of points");
            for (std::size_t i = 0; i < pts.size(); ++i) pc.points.push_back(vec(pts[i], "probes.points[" + std::to_string(i) + "]", n));
        }
        pc.local_rho = num(p, P, "local_rho", pc.local_rho);
        pc.eta = num(p, P, "eta", pc.eta);
        pc.iota_h = num(p, P, "iota_h", 0.0);
        pc.eps = num(p, P, "eps", pc.eps);
        pc.cal_radius = num(p, P, "cal_radius", pc.cal_radius);
        if (p.contains("omega")) pc.omega = vec(p.at("omega"), "probes.omega", n);
        if (p.contains("omega2")) pc.omega2 = vec(p.at("omega2"), "probes.omega2", n);
        pc.flavor = str(p, P, "flavor", pc.flavor);
        if (pc.flavor != "plain" && pc.flavor != "modulated") fail("probes.flavor", "expected plain or modulated");
        pc.tau = num(p, P, "tau", 0.0);
        if (p.contains("xi")) pc.xi = vec(p.at("xi"), "probes.xi", n);
        if (p.contains("p")) pc.p = vec(p.at("p"), "probes.p", n);
        pc.amplitude = num(p, P, "amplitude", 1.0);
        if (p.contains("rho_sweep")) pc.rho_sweep = num_list(p.at("rho_sweep"), "probes.rho_sweep");
        if (p.contains("eps_sweep")) pc.eps_sweep = num_list(p.at("eps_sweep"), "probes.eps_sweep");
        if (!(pc.rho > 1) || !(pc.local_rho > 1)) fail("probes", "frequencies must exceed 1");
        if (!(pc.h > 0) || !(pc.M > 0) || pc.N < 0) fail("probes", "h, M must be positive and N nonnegative");
    }
    if (pc.T_per <= 0) pc.T_per = T;
    for (int d = 0; d < n; ++d)
        if (pc.L_per[d] <= 0) pc.L_per[d] = sc.domain.kind == Domain::Kind::Box ? sc.domain.lengths[d] : 2 * sc.domain.radius;
    if (pc.iota_h <= 0) pc.iota_h = T / 10;

    ScheduleConstants& c = sc.constants;
    c.n = n;
    c.N = pc.N;
    c.T_star = T;
    bool explicit_scales = false;
    if (j.contains("schedule_constants")) {
        const json& s = j.at("schedule_constants");
        const std::string S = "schedule_constants";
        check_keys(s, S, {"N", "kappa", "lambda", "Lambda", "m3", "mu1", "mu_prime", "gamma_star", "T_star", "rho_scale", "M_scale",
                          "h_scale"});
        c.N = integer(s, S, "N", c.N);
        c.kappa = integer(s, S, "kappa", c.kappa);
        c.lambda = num(s, S, "lambda", c.lambda);
        c.Lambda = num(s, S, "Lambda", c.Lambda);
        c.m3 = num(s, S, "m3", c.m3);
        c.mu1 = num(s, S, "mu1", c.mu1);
        c.mu_prime = num(s, S, "mu_prime", c.mu_prime);
        c.gamma_star = num(s, S, "gamma_star", c.gamma_star);
        c.T_star = num(s, S, "T_star", c.T_star);
        if (c.T_star > T + 1e-12) fail("schedule_constants.T_star", "must not exceed the grid horizon");
        explicit_scales = s.contains("rho_scale") || s.contains("M_scale") || s.contains("h_scale");
        c.rho_scale = num(s, S, "rho_scale", 1.0);
        c.M_scale = num(s, S, "M_scale", 1.0);
        c.h_scale = num(s, S, "h_scale", 1.0);
    }
    try {
        if (!explicit_scales) calibrate_scales(c, pc.reference_delta, pc.rho, pc.h, pc.M);
    } catch (const ScheduleError& e) {
        fail("probes.reference_delta", e.what());
    }

    if (j.contains("sweep")) {
        const json& w = j.at("sweep");
        check_keys(w, "sweep", {"deltas", "eval_cells", "eval_steps"});
        if (w.contains("deltas")) sc.sweep.deltas = num_list(w.at("deltas"), "sweep.deltas");
        for (double d : sc.sweep.deltas)
            if (!(d > 0)) fail("sweep.deltas", "noise levels must be positive");
        sc.sweep.eval_cells = integer(w, "sweep", "eval_cells", 32);
        sc.sweep.eval_steps = integer(w, "sweep", "eval_steps", 128);
    }
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(parse_json_text(ss.str(), path));
}

GridPtr Scenario::make_grid_ptr() const { return make_grid(domain, grid.cells, grid.T, grid.steps); }

Potential Scenario::truth() const { return beta2 ? beta - *beta2 : beta; }

NonlinearOptions Scenario::solver_options() const {
    NonlinearOptions o;
    o.linear.backend = grid.backend;
    return o;
}

}  // namespace nlsdn
