#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace nlsdn;

namespace {

BeamSpec beam_spec(double rho, int n_phase = 4) {
    BeamSpec b;
    b.p = Vec3(0.5, 0.5, 0);
    b.omega = Vec3(1, 0, 0);
    b.eta = 0.3;
    b.rho = rho;
    b.n_phase = n_phase;
    b.n_amp = 1;
    b.iota = TimePlateau(0.05, 0.5);
    return b;
}

GOProbe go(const GridPtr& g, Vec3 w, double rho, GOSpec::Flavor fl = GOSpec::Flavor::Plain, double tau = 0, Vec3 xi = Vec3::Zero()) {
    GOSpec s;
    s.omega = w;
    s.rho = rho;
    s.flavor = fl;
    s.tau = tau;
    s.xi = xi;
    s.h = 0.1;
    s.T_star = g->T();
    return build_go(s, Potential::uniform(0.5), g);
}

}  // namespace

TEST(Riccati, ScalarClosedForm) {
    CMat H0 = CMat::Identity(1, 1) * cplx(0, 1);
    auto sol = solve_riccati(H0, 1.0, -1.0, 1.0, 0.01);
    EXPECT_LT(std::abs(sol.at(1.0)(0, 0) - cplx(0.5, 0.5)), 1e-8);
    for (double s : {-0.7, -0.2, 0.3, 0.9}) EXPECT_LT(std::abs(sol.at(s)(0, 0) - riccati_exact(H0, 1.0, s)(0, 0)), 1e-8);
    EXPECT_GT(sol.min_imag, 0.0);
}

TEST(Riccati, DiagonalIn3D) {
    CMat H0 = CMat::Identity(2, 2) * cplx(0, 1);
    auto sol = solve_riccati(H0, 2.0, -1.0, 1.5, 0.01);
    for (double s : {-0.5, 0.4, 1.2}) {
        cplx h = cplx(0, 1) / (1.0 + cplx(0, s / 2.0));
        CMat H = sol.at(s);
        EXPECT_LT(std::abs(H(0, 0) - h), 1e-8);
        EXPECT_LT(std::abs(H(1, 1) - h), 1e-8);
        EXPECT_LT(std::abs(H(0, 1)), 1e-12);
    }
}

TEST(Riccati, ImaginaryPartStaysPositive) {
    CMat H0(2, 2);
    H0 << cplx(0.3, 1.0), cplx(-0.2, 0.1), cplx(-0.2, 0.1), cplx(1.0, 0.5);
    auto sol = solve_riccati(H0, 1.3, -3.0, 3.0, 0.01);
    EXPECT_GT(sol.min_imag, 0.0);
    for (double s : {-2.0, 0.0, 2.5}) EXPECT_LT((sol.at(s) - riccati_exact(H0, 1.3, s)).norm(), 1e-8);
}

TEST(Riccati, RejectsInvalidInitialHessian) {
    EXPECT_THROW(check_initial_hessian(CMat::Identity(1, 1) * cplx(1, 0)), ProbeError);
    CMat a(2, 2);
    a << cplx(0, 1), cplx(1, 0), cplx(0, 0), cplx(0, 1);
    EXPECT_THROW(check_initial_hessian(a), ProbeError);
}

TEST(BeamTest, AxisAmplitudeClosedForm) {
    Beam b = build_beam(beam_spec(12), Potential::zero(), Domain::unit_square());
    for (double s : {-0.4, -0.1, 0.0, 0.2, 0.45}) {
        cplx want = std::pow(1.0 + cplx(0, s), -0.5);
        EXPECT_LT(std::abs(b.axis_amplitude(s) - want), 1e-6) << s;
    }
}

TEST(BeamTest, GaussianCrossSection) {
    const double rho = 20;
    Beam b = build_beam(beam_spec(rho), Potential::zero(), Domain::unit_square());
    const double t = 0.25;
    const cplx v0 = b.value(t, Vec3(0.5, 0.5, 0));
    for (double z : {0.02, 0.05, 0.1, 0.14}) {
        double want = std::exp(-rho * z * z / 2);
        EXPECT_NEAR(std::abs(b.value(t, Vec3(0.5, 0.5 + z, 0)) / v0), want, 1e-6) << z;
    }
}

TEST(BeamTest, ImaginaryPhaseBoundedBelow) {
    Beam b = build_beam(beam_spec(15), Potential::uniform(0.5), Domain::unit_square());
    const double c0 = b.imag_lower_bound();
    ASSERT_GT(c0, 0.0);
    for (double s : {-0.45, 0.0, 0.45})
        for (double z : {0.05, 0.1, 0.2}) {
            Vec3 x(0.5 + s, 0.5 + z, 0);
            EXPECT_GE(b.phase(x).imag(), c0 * z * z * (1 - 1e-9));
        }
}

TEST(BeamTest, ResidualSupportedInTube) {
    auto g = make_grid(Domain::unit_square(), {80, 80}, 0.5, 40);
    Beam b = build_beam(beam_spec(10), Potential::zero(), Domain::unit_square());
    auto r = beam_residual(b, Potential::zero(), g);
    for (int k = 0; k < g->time_levels(); ++k)
        for (int i = 0; i < g->num_nodes(); ++i)
            if (!b.in_tube(g->coord(i))) EXPECT_EQ(r.field.at(k, i), cplx(0));
}

TEST(BeamTest, ResidualSlopeAndPhaseOrder) {
    // one decade of ρ, each grid resolving the width ρ^{-1/2} with 6.5 nodes
    const Domain dom = Domain::box({1.0, 2.0});
    std::vector<double> rs{100, 215, 464, 1000};
    auto slope = [&](int n_phase) {
        std::vector<double> res;
        for (double r : rs) {
            BeamSpec b;
            b.p = Vec3(0.5, 1.0, 0);
            b.eta = 0.9;
            b.rho = r;
            b.n_phase = n_phase;
            b.iota = TimePlateau(0.1, 1.0);
            int c = static_cast<int>(std::ceil(6.5 * std::sqrt(r)));
            auto g = make_grid(dom, {c, 2 * c}, 1.0, 40);
            res.push_back(beam_residual(build_beam(b, Potential::zero(), dom), Potential::zero(), g).l2);
        }
        return fx::fit_slope(rs, res);
    };
    double s4 = slope(4), s2 = slope(2);
    EXPECT_LE(s4, -0.5);
    EXPECT_LT(s4, s2);
}

TEST(BeamTest, UnderResolutionDetected) {
    auto g = make_grid(Domain::unit_square(), {20, 20}, 0.5, 10);
    Beam b = build_beam(beam_spec(40), Potential::zero(), Domain::unit_square());
    EXPECT_THROW(beam_residual(b, Potential::zero(), g), ResolutionError);
}

TEST(GO, PlainFirstAmplitude) {
    auto g = make_grid(Domain::unit_square(), {16, 16}, 1.0, 40);
    GOSpec s;
    s.omega = Vec3(1, 0.5, 0);
    s.rho = 8;
    s.y = Vec3::Zero();
    auto p = build_go(s, Potential::zero(), g);
    for (double t : {0.12, 0.15, 0.5, 0.85})
        for (int i = 0; i < g->num_nodes(); i += 5) {
            Vec3 x = g->coord(i);
            cplx want = -0.5 / s.omega.squaredNorm() * p.theta().derivative(t, 1) * x.dot(s.omega);
            EXPECT_LT(std::abs(p.amplitude(1, t, x) - want), 1e-10);
        }
    // vanishes on the hyperplane x·ω = 0
    Vec3 perp(-0.5, 1, 0);
    EXPECT_LT(std::abs(p.amplitude(1, 0.15, 0.3 * perp)), 1e-14);
}

TEST(GO, ModulatedLeadingAmplitudeConstantAlongRays) {
    auto g = make_grid(Domain::unit_square(), {16, 16}, 1.0, 40);
    Vec3 w(1, 1, 0), xi(2 * kPi, -2 * kPi, 0);
    GOSpec s;
    s.omega = w;
    s.rho = 10;
    s.flavor = GOSpec::Flavor::Modulated;
    s.tau = 3;
    s.xi = xi;
    auto p = build_go(s, Potential::zero(), g);
    for (double t : {0.15, 0.5})
        for (double a : {0.0, 0.2, 0.4}) {
            Vec3 x(0.2, 0.6, 0);
            EXPECT_LT(std::abs(p.amplitude(0, t, x + a * w) - p.amplitude(0, t, x)), 1e-12);
        }
}

TEST(GO, PhaseCancellationOnGrid) {
    auto g = make_grid(Domain::unit_square(), {16, 16}, 1.0, 40);
    WaveTriple t = select_wave_triple(2, Vec3(1, -1, 0), 1.3);
    auto p1 = go(g, t.omega1, 9), p2 = go(g, t.omega2, 9), p0 = go(g, t.omega0, 9);
    for (int k = 0; k < g->time_levels(); k += 4)
        for (int i = 0; i < g->num_nodes(); ++i) {
            double tt = g->time(k);
            Vec3 x = g->coord(i);
            double sum = p1.phase_Phi(tt, x) + p2.phase_Phi(tt, x) - p0.phase_Phi(tt, x);
            EXPECT_LT(std::abs(sum), 1e-12 * (1 + std::abs(p0.phase_Phi(tt, x))));
        }
}

TEST(GO, TransportStepLinear) {
    GOAuxGrid G;
    G.y = Vec3(0.5, 0.5, 0);
    G.u = Vec3(1, 0, 0);
    G.e = Vec3(0, 1, 0);
    G.h = 0.05;
    G.half = 8;
    G.times = {0.2, 0.5};
    GOAuxField a(G.times.size() * G.plane());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = cplx(std::sin(0.3 * i), std::cos(0.7 * i));
    GOAuxField a2 = a;
    for (auto& v : a2) v *= 2.0;
    auto b = go_transport_step(G, a, Potential::uniform(0.5), 1.0), b2 = go_transport_step(G, a2, Potential::uniform(0.5), 1.0);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_LT(std::abs(b2[i] - 2.0 * b[i]), 1e-12 * (1 + std::abs(b[i])));
}

TEST(Completion, ExactSolutionWithProbeTrace) {
    auto g = make_grid(Domain::unit_square(), {24, 24}, 1.0, 200);
    auto v = go(g, Vec3(1, 0, 0), 5).sample(g);
    auto c = complete_to_solution(v, Potential::uniform(0.5), Direction::Forward);
    EXPECT_LT(discrete_residual(c.U, Potential::uniform(0.5)), 1e-9 * c.U.max_abs() * (1 + 4.0 / (g->dx(0) * g->dx(0))));
    BoundaryData tu = BoundaryData::trace_of(c.U);
    EXPECT_EQ(tu.raw(), c.trace.raw());
    BoundaryData tr = BoundaryData::trace_of(c.r);
    EXPECT_EQ(tr.max_abs(), 0.0);
}

TEST(Completion, RemainderRatioDecreasesInRho) {
    auto g = make_grid(Domain::unit_square(), {64, 64}, 1.0, 1600);
    std::vector<double> rs{2, 4, 8, 16}, ratio;
    for (double r : rs) {
        auto c = complete_to_solution(go(g, Vec3(1, 0, 0), r).sample(g), Potential::uniform(0.5), Direction::Forward);
        ratio.push_back(c.r_l2 / c.v_l2);
    }
    EXPECT_LT(fx::fit_slope(rs, ratio), 0.0);
}
