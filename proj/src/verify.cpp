#include <chrono>
#include <filesystem>
#include <random>
#include <sstream>

#include "nlsdn/harness.hpp"

namespace nlsdn {

namespace {

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
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

BoundaryData boundary_fn(const GridPtr& g, const std::function<cplx(double, const Vec3&)>& fn) {
    BoundaryData f(g);
    for (int k = 0; k < g->time_levels(); ++k)
        for (int b = 0; b < f.slots(); ++b) f.at(k, b) = fn(g->time(k), g->coord(g->boundary()[b]));
    return f;
}

// smooth boundary data vanishing near t = 0, optionally switched off after t1
BoundaryData pulse(const GridPtr& g, double t1, double k1, double k2) {
    return boundary_fn(g, [=](double t, const Vec3& x) {
        double on = smooth_step(t / (0.2 * t1)) * smooth_step((t1 - t) / (0.2 * t1));
        return on * std::exp(cplx(0, k1 * x[0] + k2 * x[1] - 3 * t)) * (1 + 0.3 * x[0] * x[1]);
    });
}

Potential smooth_bump(double amp, Vec3 c, double r) {
    Potential p = Potential::from_function(
        [=](double, const Vec3& x) { return cplx(amp * smooth_step((r - (x - c).head(2).norm()) / (0.5 * r))); }, true, true,
        std::abs(amp) * (1 + 1e-9));
    p.label = "bump";
    return p;
}

struct Suite {
    VerifyReport rep;
    void run(const std::string& module, const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
        VerifyItem it;
        it.module = module;
        it.name = name;
        try {
            auto [ok, m] = fn();
            it.pass = ok;
            it.measured = m;
        } catch (const std::exception& e) {
            it.pass = false;
            it.measured = std::string("error: ") + e.what();
        }
        rep.items.push_back(it);
    }
};

}  // namespace

bool VerifyReport::all_pass() const {
    for (const auto& i : items)
        if (!i.pass) return false;
    return !items.empty();
}

std::string VerifyReport::text() const {
    std::ostringstream s;
    int fails = 0;
    for (const auto& i : items) {
        s << (i.pass ? "PASS " : "FAIL ") << i.module << " :: " << i.name << " :: " << i.measured << "\n";
        fails += !i.pass;
    }
    s << items.size() - fails << "/" << items.size() << " invariants hold (" << fmt("%.1f", runtime_s) << " s)\n";
    return s.str();
}

json VerifyReport::to_json() const {
    json j;
    j["runtime_s"] = runtime_s;
    j["all_pass"] = all_pass();
    for (const auto& i : items) j["items"].push_back({{"module", i.module}, {"name", i.name}, {"pass", i.pass}, {"measured", i.measured}});
    return j;
}

VerifyReport verify_suite(const VerifyOptions& opt) {
    if (opt.level != "fast" && opt.level != "full") throw std::invalid_argument("verify level must be fast or full");
    const bool full = opt.level == "full";
    auto t0 = std::chrono::steady_clock::now();
    Suite S;
    const LinearOptions lin = opt.solver;
    NonlinearOptions nlo;
    nlo.linear = lin;
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> U(-1, 1);

    // ---- geometry ----
    const Domain sq = Domain::unit_square();
    S.run("geometry", "line hits lie on the boundary, one per direction", [&] {
        auto [a, b] = line_boundary_hits(sq, Line{Vec3(0.5, 0.5, 0), Vec3(1, 0, 0)});
        double e = (a - Vec3(0, 0.5, 0)).norm() + (b - Vec3(1, 0.5, 0)).norm();
        double worst = 0;
        for (int k = 0; k < 50; ++k) {
            Vec3 p(0.5 + 0.4 * U(rng), 0.5 + 0.4 * U(rng), 0), w(U(rng), U(rng), 0);
            if (w.norm() < 1e-3) continue;
            auto [c, d] = line_boundary_hits(sq, Line{p, w});
            worst = std::max({worst, sq.dist_to_boundary(c), sq.dist_to_boundary(d)});
        }
        return std::pair{e < 1e-14 && worst < 1e-12, fmt("axis error %.1e, max boundary distance %.1e", e, worst)};
    });
    S.run("geometry", "visibility set is monotone in the patch", [&] {
        BoundaryPatch small;
        small.exclude(Vec3(-1, 0.6, 0), Vec3(2, 2, 0));
        int viol = 0, members = 0;
        for (int i = 1; i < 10; ++i)
            for (int j = 1; j < 10; ++j) {
                Vec3 p(i / 10.0, j / 10.0, 0);
                bool a = in_visibility_set(sq, small, p, 64).member;
                bool b = in_visibility_set(sq, BoundaryPatch::full(), p, 64).member;
                members += a;
                viol += a && !b;
            }
        return std::pair{viol == 0 && members > 0, fmt("%.0f violations, %.0f members of the smaller set", viol, members)};
    });
    S.run("geometry", "time plateau vanishes near the ends and is 1 in the middle", [&] {
        TimePlateau th(0.1, 1.0);
        double off = 0, on = 0;
        for (int k = 0; k <= 100; ++k) {
            double t = k / 100.0;
            if (t <= 0.1 || t >= 0.9) off = std::max(off, th(t));
            if (t >= 0.2 && t <= 0.8) on = std::max(on, std::abs(th(t) - 1));
        }
        return std::pair{off == 0 && on < 1e-15, fmt("max off-support %.1e, plateau defect %.1e", off, on)};
    });

    // ---- pde_core ----
    auto g24 = make_grid(sq, {24, 24}, 1.0, 200);
    const Potential qreal = Potential::uniform(0.7);
    S.run("pde_core", "solve_linear is additive in the boundary data", [&] {
        BoundaryData f1 = pulse(g24, 0.9, 2, 1), f2 = pulse(g24, 0.6, -1, 3);
        auto u1 = solve_linear(g24, qreal, &f1, nullptr, Direction::Forward, lin);
        auto u2 = solve_linear(g24, qreal, &f2, nullptr, Direction::Forward, lin);
        BoundaryData f12 = f1 + f2;
        auto u12 = solve_linear(g24, qreal, &f12, nullptr, Direction::Forward, lin);
        SpaceTimeField d = u12;
        d -= u1;
        d -= u2;
        double r = l2_norm(d) / l2_norm(u12);
        return std::pair{r < 1e-8, fmt("relative defect %.2e", r)};
    });
    S.run("pde_core", "mass conserved after the boundary control switches off", [&] {
        BoundaryData f = pulse(g24, 0.4, 2, 1);
        auto u = solve_linear(g24, qreal, &f, nullptr, Direction::Forward, lin);
        const int k0 = static_cast<int>(std::ceil(0.4 / g24->dt())) + 1;
        double m0 = l2_norm_at(u, k0), drift = 0;
        for (int k = k0; k < g24->time_levels(); ++k) drift = std::max(drift, std::abs(l2_norm_at(u, k) - m0) / m0);
        return std::pair{drift <= 1e-6, fmt("relative drift %.2e", drift)};
    });
    S.run("pde_core", "Picard with beta = 0 reproduces the linear solve", [&] {
        BoundaryData f = pulse(g24, 0.9, 2, 1);
        auto r = solve_nonlinear(g24, qreal, Potential::zero(), f, nlo);
        auto u = solve_linear(g24, qreal, &f, nullptr, Direction::Forward, lin);
        SpaceTimeField d = r.u;
        d -= u;
        return std::pair{l2_norm(d) == 0 && r.iterations == 1, fmt("difference %.1e, iterations %.0f", l2_norm(d), r.iterations)};
    });
    S.run("pde_core", "Picard iteration count non-increasing in the data scale", [&] {
        BoundaryData f = pulse(g24, 0.9, 2, 1);
        Potential beta = smooth_bump(1.0, Vec3(0.5, 0.5, 0), 0.3);
        int prev = 1 << 30;
        bool ok = true;
        std::string m;
        for (double s : {1.0, 0.5, 0.25, 0.1}) {
            int it = solve_nonlinear(g24, qreal, beta, cplx(s) * f, nlo).iterations;
            ok = ok && it <= prev;
            prev = it;
            m += fmt("%.0f ", it);
        }
        return std::pair{ok, "iterations " + m};
    });
    S.run("pde_core", "Neumann trace exact on affine fields", [&] {
        SpaceTimeField u(g24);
        for (int k = 0; k < g24->time_levels(); ++k)
            for (int i = 0; i < g24->num_nodes(); ++i) u.at(k, i) = g24->coord(i)[0];
        auto tr = neumann_trace(u, BoundaryPatch::from_faces({1}));
        double e = 0;
        for (auto v : tr.raw()) e = std::max(e, std::abs(v - 1.0));
        return std::pair{e < 1e-10, fmt("max error %.1e", e)};
    });
    if (full) {
        S.run("pde_core", "manufactured solution converges at second order", [&] {
            auto err = [&](int c, int st) {
                auto g = make_grid(sq, {c, c}, 1.0, st);
                auto ex = [](double t, const Vec3& x) { return cplx(t * t * std::sin(kPi * x[0]) * std::sin(kPi * x[1])); };
                SpaceTimeField F(g);
                for (int k = 0; k < g->time_levels(); ++k)
                    for (int i = 0; i < g->num_nodes(); ++i) {
                        double t = g->time(k);
                        Vec3 x = g->coord(i);
                        F.at(k, i) = cplx(-2 * kPi * kPi * t * t, 2 * t) * std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
                    }
                BoundaryData f = boundary_fn(g, ex);
                auto u = solve_linear(g, Potential::zero(), &f, &F, Direction::Forward, lin);
                double e = 0;
                for (int k = 0; k < g->time_levels(); ++k)
                    for (int i = 0; i < g->num_nodes(); ++i) e = std::max(e, std::abs(u.at(k, i) - ex(g->time(k), g->coord(i))));
                return e;
            };
            double a = err(16, 64), b = err(32, 128);
            double order = std::log2(a / b);
            return std::pair{order >= 1.8, fmt("observed order %.3f", order)};
        });
        S.run("pde_core", "expansion remainders scale as eps^2 and eps^3", [&] {
            BoundaryData f = pulse(g24, 0.9, 2, 1);
            Potential beta = smooth_bump(1.0, Vec3(0.5, 0.5, 0), 0.3);
            auto U1 = solve_linear(g24, qreal, &f, nullptr, Direction::Forward, lin);
            SpaceTimeField W20 = solve_w(qreal, beta, U1, U1, lin);
            std::vector<double> es{1e-2, 10.0 / 316.2278, 1e-1}, r1, r2;
            for (double e : es) {
                auto u = solve_nonlinear(g24, qreal, beta, cplx(e) * f, nlo).u;
                SpaceTimeField d = u;
                SpaceTimeField eu = U1;
                eu *= e;
                d -= eu;
                r1.push_back(l2_norm(d));
                SpaceTimeField w = W20;
                w *= 0.5 * e * e;
                d -= w;
                r2.push_back(l2_norm(d));
            }
            double s1 = slope(es, r1), s2 = slope(es, r2);
            return std::pair{std::abs(s1 - 2) <= 0.2 && std::abs(s2 - 3) <= 0.3, fmt("slopes %.3f and %.3f", s1, s2)};
        });
    }

    // ---- probes ----
    S.run("probes", "scalar Riccati matches the closed form, Im H stays positive", [&] {
        CMat H0 = CMat::Identity(1, 1) * cplx(0, 1);
        auto sol = solve_riccati(H0, 1.0, -1.0, 1.0, 0.01);
        double e = std::abs(sol.at(1.0)(0, 0) - cplx(0.5, 0.5));
        return std::pair{e <= 1e-8 && sol.min_imag > 0, fmt("|h(1) - (0.5+0.5i)| = %.2e, min Im %.3f", e, sol.min_imag)};
    });
    S.run("probes", "product phase cancels on the grid", [&] {
        WaveTriple t = select_wave_triple(2, Vec3(1, -1, 0), 1.0);
        auto go = [&](const Vec3& w) {
            GOSpec s;
            s.omega = w;
            s.rho = 9;
            return build_go(s, qreal, g24);
        };
        auto p1 = go(t.omega1), p2 = go(t.omega2), p0 = go(t.omega0);
        double m = 0;
        for (int k = 0; k < g24->time_levels(); k += 10)
            for (int i = 0; i < g24->num_nodes(); ++i) {
                double t_ = g24->time(k);
                Vec3 x = g24->coord(i);
                m = std::max(m, std::abs(p1.phase_Phi(t_, x) + p2.phase_Phi(t_, x) - p0.phase_Phi(t_, x)) /
                                    (1 + std::abs(p0.phase_Phi(t_, x))));
            }
        return std::pair{m < 1e-13, fmt("max relative phase sum %.1e", m)};
    });
    S.run("probes", "plain GO first amplitude matches -(1/2|w|^2) theta'(t) x.w", [&] {
        GOSpec s;
        s.omega = Vec3(1, 0.5, 0);
        s.rho = 8;
        s.y = Vec3::Zero();
        auto p = build_go(s, Potential::zero(), g24);
        double m = 0;
        for (double t : {0.15, 0.18, 0.83}) {
            for (int i = 0; i < g24->num_nodes(); i += 7) {
                Vec3 x = g24->coord(i);
                cplx want = -0.5 / s.omega.squaredNorm() * p.theta().derivative(t, 1) * x.dot(s.omega);
                m = std::max(m, std::abs(p.amplitude(1, t, x) - want));
            }
        }
        return std::pair{m < 1e-10, fmt("max deviation %.1e", m)};
    });
    S.run("probes", "GO transport recursion is linear", [&] {
        GOAuxGrid G;
        G.y = Vec3(0.5, 0.5, 0);
        G.u = Vec3(1, 0, 0);
        G.e = Vec3(0, 1, 0);
        G.h = 0.05;
        G.half = 10;
        G.times = {0.2, 0.5};
        GOAuxField a(G.times.size() * G.plane());
        for (auto& v : a) v = cplx(U(rng), U(rng));
        GOAuxField a2 = a;
        for (auto& v : a2) v *= 2.0;
        auto b = go_transport_step(G, a, qreal, 1.0), b2 = go_transport_step(G, a2, qreal, 1.0);
        double m = 0, s = 0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            m = std::max(m, std::abs(b2[i] - 2.0 * b[i]));
            s = std::max(s, std::abs(b[i]));
        }
        return std::pair{m <= 1e-12 * (1 + s), fmt("max defect %.1e", m)};
    });
    S.run("probes", "beam trace supported in the patch, Im phase bounded below", [&] {
        auto g = make_grid(sq, {40, 40}, 0.5, 100);
        BoundaryPatch gam = BoundaryPatch::from_faces({0, 1});
        BeamSpec b;
        b.p = Vec3(0.5, 0.5, 0);
        b.omega = Vec3(1, 0, 0);
        b.eta = 0.3;
        b.rho = 20;
        b.iota = TimePlateau(0.05, 0.5);
        Beam beam = build_beam(b, qreal, sq);
        BoundaryData tr = beam.trace(g);
        double out = tr.max_outside(gam) / tr.max_abs();
        return std::pair{out < 1e-12 && beam.imag_lower_bound() > 0,
                         fmt("outside/peak %.1e, measured c0 %.3f", out, beam.imag_lower_bound())};
    });
    if (full) {
        S.run("probes", "beam residual decays in rho (slope <= -0.5)", [&] {
            const Domain dom = Domain::box({1.0, 2.0});
            std::vector<double> rs{100, 215, 464, 1000}, res;
            for (double r : rs) {
                BeamSpec b;
                b.p = Vec3(0.5, 1.0, 0);
                b.eta = 0.9;
                b.rho = r;
                b.n_phase = 4;
                b.n_amp = 1;
                b.iota = TimePlateau(0.1, 1.0);
                // 6.5 nodes across the beam width ρ^{-1/2}
                int c = static_cast<int>(std::ceil(6.5 * std::sqrt(r)));
                auto g = make_grid(dom, {c, 2 * c}, 1.0, 40);
                res.push_back(beam_residual(build_beam(b, Potential::zero(), dom), Potential::zero(), g).l2);
            }
            double s = slope(rs, res);
            return std::pair{s <= -0.5, fmt("fitted slope %.3f", s)};
        });
    }

    // ---- linearize ----
    S.run("linearize", "integral identity defect small, exact with the cutoff", [&] {
        auto g = make_grid(sq, {32, 32}, 1.0, 80);
        Potential q = Potential::uniform(0.5);
        auto mk = [&](Vec3 w, GOSpec::Flavor fl, double tau, Vec3 xi) {
            GOSpec s;
            s.omega = w;
            s.rho = 4;
            s.flavor = fl;
            s.tau = tau;
            s.xi = xi;
            s.h = 0.1;
            return build_go(s, q, g).sample(g);
        };
        auto U1 = complete_to_solution(mk(Vec3(1, 0, 0), GOSpec::Flavor::Plain, 0, Vec3::Zero()), q, Direction::Forward, lin).U;
        auto U2 = complete_to_solution(mk(Vec3(0, 1, 0), GOSpec::Flavor::Plain, 0, Vec3::Zero()), q, Direction::Forward, lin).U;
        auto U0 = complete_to_solution(mk(Vec3(1, 1, 0), GOSpec::Flavor::Modulated, 2, Vec3(1, -1, 0)), q, Direction::Adjoint, lin).U;
        Potential b = smooth_bump(1.0, Vec3(0.5, 0.5, 0), 0.3);
        auto a = integral_identity_defect_full(q, b, Potential::zero(), U1, U2, U0, std::nullopt, {}, lin);
        auto c = integral_identity_defect_full(q, b, Potential::zero(), U1, U2, U0, BoundaryCutoff(sq, 0.15), {}, lin);
        double ra = std::abs(a.defect) / a.scale, rc = std::abs(c.defect) / c.scale;
        return std::pair{ra <= 1e-2 && rc <= 1e-10, fmt("relative defect %.2e (boundary form), %.2e (cutoff form)", ra, rc)};
    });
    S.run("linearize", "second difference vanishes for beta1 = beta2", [&] {
        auto g = make_grid(sq, {16, 16}, 1.0, 60);
        Potential b = smooth_bump(1.0, Vec3(0.5, 0.5, 0), 0.3);
        Model m{g, qreal, b, BoundaryPatch::full(), nlo};
        DNEvaluator dn = [&](const BoundaryData& f) { return m.dn(f); };
        BoundaryData f1 = pulse(g, 0.9, 2, 1), f2 = pulse(g, 0.9, -1, 2);
        auto r1 = second_difference_dn(dn, f1, f2, 0.05, 0.05);
        auto r2 = second_difference_dn(dn, f1, f2, 0.05, 0.05);
        double d = (r1.d2 - r2.d2).l2_norm();
        double rc = (r1.recompute() - r1.d2).l2_norm();
        return std::pair{d == 0 && rc == 0, fmt("difference %.1e, recompute mismatch %.1e", d, rc)};
    });
    if (full) {
        S.run("linearize", "second difference converges to the W trace at rate eps", [&] {
            auto g = make_grid(sq, {24, 24}, 1.0, 120);
            Potential b = smooth_bump(1.0, Vec3(0.5, 0.5, 0), 0.3);
            Model m{g, qreal, b, BoundaryPatch::full(), nlo};
            DNEvaluator dn = [&](const BoundaryData& f) { return m.dn(f); };
            BoundaryData f1 = pulse(g, 0.9, 2, 1), f2 = pulse(g, 0.9, -1, 2);
            auto U1 = solve_linear(g, qreal, &f1, nullptr, Direction::Forward, lin);
            auto U2 = solve_linear(g, qreal, &f2, nullptr, Direction::Forward, lin);
            // mixed term of u_{ε1f1+ε2f2}: (i∂t+Δ+q)W11 = -2βU1U2
            NeumannTrace oracle = neumann_trace(solve_w(qreal, b, U1, U2, lin), BoundaryPatch::full());
            std::vector<double> es{0.02, 0.04, 0.08}, errs;
            for (double e : es) errs.push_back((second_difference_dn(dn, f1, f2, e, e).d2 - oracle).l2_norm());
            double s = slope(es, errs);
            return std::pair{std::abs(s - 1) <= 0.2, fmt("fitted slope %.3f", s)};
        });
    }

    // ---- reconstruct ----
    S.run("reconstruct", "random wave triples satisfy both identities", [&] {
        double worst = 0;
        for (int k = 0; k < 100; ++k) {
            int n = 2 + k % 2;
            Vec3 xi(U(rng), U(rng), n == 3 ? U(rng) : 0);
            if (xi.norm() < 1e-6) continue;
            WaveTriple t = select_wave_triple(n, xi, 1 + std::abs(U(rng)));
            worst = std::max({worst, t.sum_residual(), t.norm_residual()});
        }
        return std::pair{worst < 1e-12, fmt("worst residual %.1e", worst)};
    });
    S.run("reconstruct", "higher-order tuples satisfy their constraints", [&] {
        double worst = 0;
        for (double r = 0.05; r < 1; r += 0.05) {
            auto w = select_wave_tuple_higher(2, NonlinearityKind::GrossPitaevskii, 3, r);
            worst = std::max({worst, w.sum_residual, w.norm_residual});
        }
        for (int m = 2; m <= 3; ++m) {
            auto w = select_wave_tuple_higher(m, NonlinearityKind::Power, 3);
            worst = std::max({worst, w.sum_residual, w.norm_residual});
        }
        return std::pair{worst < 1e-12, fmt("worst residual %.1e", worst)};
    });
    S.run("reconstruct", "schedule invariants over random admissible delta", [&] {
        ScheduleConstants c;
        c.gamma_star = 0.5;
        c.T_star = 5;
        std::uniform_real_distribution<double> L(-12, -1.6);
        double worst = 0;
        for (int k = 0; k < 100; ++k) worst = std::max(worst, schedule_invariant_residual(make_schedule(std::pow(10.0, L(rng)), c)));
        return std::pair{worst < 1e-12, fmt("worst relative residual %.1e", worst)};
    });
    S.run("reconstruct", "inversion of exact coefficients is the identity on the plateau", [&] {
        // β = 1 + cos(2πx1)cos(2πt); time coefficients of βθ³ from a 65-point DFT, so the lattice
        // ball (M between 2π·sqrt(32²+1) and 2π·33) holds exactly one period of DFT frequencies
        const double T = 1.0, h = 0.2, M = 204;
        const int Q = 65;
        FourierLattice lat;
        lat.T_per = T;
        ScheduleConstants c;
        c.T_star = T;
        c.gamma_star = 0.5;
        calibrate_scales(c, 1e-3, 10, h, M);
        Schedule s = make_schedule(1e-3, c);
        TimePlateau th(h, T);
        auto beta = [](double t, double x) { return 1 + std::cos(2 * kPi * x) * std::cos(2 * kPi * t); };
        std::vector<FourierSample> smp;
        for (const auto& [tau, xi] : lat.points(s.M_used())) {
            FourierSample f;
            f.tau = tau;
            f.xi = xi;
            long j1 = std::lround(xi[0] / (2 * kPi)), j2 = std::lround(xi[1] / (2 * kPi));
            if (j2 == 0 && std::abs(j1) <= 1) {
                cplx a = 0;
                for (int k = 0; k < Q; ++k) {
                    double t = T * k / Q, w = std::pow(th(t), 3) * T / Q;
                    a += w * (j1 == 0 ? 1.0 : 0.5 * std::cos(2 * kPi * t)) * std::exp(cplx(0, -tau * t));
                }
                f.value = a;
            }
            smp.push_back(f);
        }
        auto inv = invert_fourier(smp, s, lat);
        double raw = 0, plateau = 0;
        for (int k = 0; k < Q; ++k) {
            double t = T * k / Q;
            for (double x = 0; x <= 1; x += 0.125) {
                Vec3 p(x, 0.3, 0);
                raw = std::max(raw, std::abs(inv.raw(t, p) - std::pow(th(t), 3) * beta(t, x)));
                if (t >= 2 * h && t <= T - 2 * h) plateau = std::max(plateau, std::abs(inv.beta(t, p) - beta(t, x)) / 2);
            }
        }
        return std::pair{raw < 1e-10 && plateau < 1e-2, fmt("round-trip error %.1e, plateau relative error %.1e", raw, plateau)};
    });
    if (full) {
        S.run("reconstruct", "identical coefficients give a zero reconstruction", [&] {
            const json cfg = {{"name", "zero"},
                              {"grid", {{"cells", 16}, {"T", 1.0}, {"steps", 120}}},
                              {"q", 0.5},
                              {"beta", {{"pair", {{{"type", "bump"}, {"center", {0.5, 0.5}}, {"radius", 0.3}},
                                                  {{"type", "bump"}, {"center", {0.5, 0.5}}, {"radius", 0.3}}}}}},
                              {"probes", {{"rho", 6}, {"h", 0.2}, {"M", 7}, {"N", 2}}}};
            Scenario sc = parse_scenario(cfg);
            auto r = run_scenario(sc, {});
            double e = r.runs.at(0).error.abs;
            return std::pair{e == 0, fmt("L2 norm of the reconstruction %.1e", e)};
        });
        S.run("reconstruct", "Fourier samples conjugate-symmetric for real beta", [&] {
            auto g = make_grid(sq, {32, 32}, 1.0, 200);
            Potential q = Potential::uniform(0.5);
            Potential b = smooth_bump(1.0, Vec3(0.5, 0.5, 0), 0.3);
            Model m{g, q, b, BoundaryPatch::full(), nlo};
            DNEvaluator dn = [&](const BoundaryData& f) { return m.dn(f); };
            ScheduleConstants c;
            c.gamma_star = 0.5;
            calibrate_scales(c, 1e-4, 6, 0.15, 8);
            Schedule s = make_schedule(1e-4, c);
            FourierSampler fs(dn, q, g, s, {});
            double worst = 0;
            std::string m_;
            for (auto [tau, xi] : std::vector<std::pair<double, Vec3>>{{2 * kPi, Vec3(kPi, kPi, 0)}, {0, Vec3(kPi, kPi, 0)}}) {
                FourierSample a = fs.sample(tau, xi), bb = fs.sample(-tau, -xi);
                double d = std::abs(a.value - std::conj(bb.value)) / std::max(std::abs(a.value), 1e-300);
                worst = std::max(worst, d);
            }
            return std::pair{worst < 0.2, fmt("worst relative asymmetry %.3f", worst)};
        });
    }

    // ---- harness ----
    S.run("harness", "dataset round trip is byte-identical", [&] {
        Scenario sc = parse_scenario(json{{"grid", {{"cells", 8}, {"steps", 10}}}});
        auto g = sc.make_grid_ptr();
        NeumannTrace tr(g, BoundaryPatch::full().trace_slots(*g));
        for (auto& v : tr.raw()) v = cplx(U(rng), U(rng));
        DNDataset d = DNDataset::from_trace(tr, sc, "random", {0.1, 0.2}, 1e-3, 7);
        std::string a = d.serialize();
        std::string b = DNDataset::deserialize(a).serialize();
        bool same_trace = DNDataset::deserialize(a).to_trace(g, BoundaryPatch::full()).raw() == tr.raw();
        return std::pair{a == b && same_trace, fmt("%.0f bytes", static_cast<double>(a.size()))};
    });
    S.run("harness", "noise has norm exactly delta", [&] {
        Scenario sc = parse_scenario(json{{"grid", {{"cells", 8}, {"steps", 10}}}});
        auto g = sc.make_grid_ptr();
        NeumannTrace tr(g, BoundaryPatch::full().trace_slots(*g));
        for (auto& v : tr.raw()) v = cplx(U(rng), U(rng));
        double worst = 0;
        for (double d : {1e-5, 1e-4, 1e-3, 1e-2}) {
            NeumannTrace n = inject_noise(tr, d, 11);
            worst = std::max(worst, std::abs((n - tr).l2_norm() - d) / d);
        }
        return std::pair{worst <= 1e-12, fmt("worst relative norm error %.1e", worst)};
    });
    S.run("harness", "scenario runs are reproducible", [&] {
        const json cfg = {{"name", "repro"},
                          {"noise_delta", 1e-4},
                          {"grid", {{"cells", 12}, {"T", 1.0}, {"steps", 60}}},
                          {"q", 0.5},
                          {"beta", {{"type", "bump"}, {"center", {0.5, 0.5}}, {"radius", 0.3}}},
                          {"probes", {{"rho", 4}, {"h", 0.2}, {"M", 7}, {"N", 2}}},
                          {"sweep", {{"eval_cells", 8}, {"eval_steps", 16}}}};
        Scenario sc = parse_scenario(cfg);
        RunOptions ro;
        ro.threads = opt.threads;
        auto a = run_scenario(sc, ro), b = run_scenario(sc, ro);
        bool same = a.runs.at(0).row.same_result(b.runs.at(0).row);
        return std::pair{same, fmt("error %.6e vs %.6e", a.runs[0].row.l2_error, b.runs[0].row.l2_error)};
    });

    S.rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return S.rep;
}

}  // namespace nlsdn
