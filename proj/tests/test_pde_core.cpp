#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace nlsdn;

namespace {

double manufactured_error(int cells, int steps, LinearOptions::Backend be) {
    auto g = make_grid(Domain::unit_square(), {cells, cells}, 1.0, steps);
    const cplx I(0, 1);
    auto exact = [](double t, const Vec3& x) { return cplx(t * t * std::sin(kPi * x[0]) * std::sin(kPi * x[1])); };
    auto F = fx::field_fn(g, [&](double t, const Vec3& x) {
        return (2.0 * I * t - 2 * kPi * kPi * t * t) * std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
    });
    auto f = fx::boundary_fn(g, exact);
    LinearOptions opt;
    opt.backend = be;
    auto u = solve_linear(g, Potential::zero(), &f, &F, Direction::Forward, opt);
    double e = 0;
    for (int k = 0; k < g->time_levels(); ++k)
        for (int i = 0; i < g->num_nodes(); ++i) e = std::max(e, std::abs(u.at(k, i) - exact(g->time(k), g->coord(i))));
    return e;
}

}  // namespace

TEST(SolveLinear, ZeroDataGivesZero) {
    auto g = make_grid(Domain::unit_square(), {8, 8}, 1.0, 10);
    BoundaryData f(g);
    auto u = solve_linear(g, Potential::uniform(2.0), &f, nullptr, Direction::Forward);
    EXPECT_EQ(u.max_abs(), 0.0);
}

TEST(SolveLinear, ManufacturedSecondOrder) {
    double e1 = manufactured_error(16, 64, LinearOptions::Backend::Auto);
    double e2 = manufactured_error(32, 128, LinearOptions::Backend::Auto);
    EXPECT_GE(std::log2(e1 / e2), 1.8);
}

TEST(SolveLinear, SpectralMatchesSparse) {
    double a = manufactured_error(12, 20, LinearOptions::Backend::Spectral);
    double b = manufactured_error(12, 20, LinearOptions::Backend::Sparse);
    EXPECT_NEAR(a, b, 1e-10);
}

using fx::boundary_fn;
using fx::bump;
using fx::field_fn;
using fx::pulse;

TEST(SolveLinear, AdditiveInData) {
    auto g = make_grid(Domain::unit_square(), {16, 16}, 1.0, 80);
    Potential q = Potential::uniform(0.7);
    BoundaryData f1 = pulse(g, 0.9, 2, 1), f2 = pulse(g, 0.6, -1, 3), f12 = f1 + f2;
    SpaceTimeField F = field_fn(g, [](double t, const Vec3& x) { return cplx(t * x[0], x[1]); });
    auto u1 = solve_linear(g, q, &f1, &F, Direction::Forward);
    auto u2 = solve_linear(g, q, &f2, nullptr, Direction::Forward);
    auto u12 = solve_linear(g, q, &f12, &F, Direction::Forward);
    SpaceTimeField d = u12;
    d -= u1;
    d -= u2;
    EXPECT_LT(l2_norm(d), 1e-10 * l2_norm(u12));
}

TEST(SolveLinear, MassConservedAfterControlStops) {
    auto g = make_grid(Domain::unit_square(), {20, 20}, 1.0, 200);
    BoundaryData f = pulse(g, 0.5, 2, 1);
    auto u = solve_linear(g, Potential::uniform(0.7), &f, nullptr, Direction::Forward);
    const int k0 = static_cast<int>(std::ceil(0.5 / g->dt())) + 1;
    const double m0 = l2_norm_at(u, k0);
    ASSERT_GT(m0, 0);
    for (int k = k0; k < g->time_levels(); ++k) EXPECT_NEAR(l2_norm_at(u, k) / m0, 1.0, 1e-6);
}

TEST(SolveLinear, AdjointRunsBackwardFromZeroFinalState) {
    auto g = make_grid(Domain::unit_square(), {12, 12}, 1.0, 40);
    BoundaryData f = boundary_fn(g, [](double t, const Vec3&) { return cplx(std::pow(1 - t, 3)); });
    auto u = solve_linear(g, Potential::uniform(0.3), &f, nullptr, Direction::Adjoint);
    EXPECT_EQ(l2_norm_at(u, g->steps()), 0.0);
    EXPECT_GT(l2_norm_at(u, 0), 0.0);
}

TEST(SolveLinear, FlippedPotentialBreaksConservation) {
    auto g = make_grid(Domain::unit_square(), {20, 20}, 1.0, 200);
    BoundaryData f = pulse(g, 0.5, 2, 1);
    LinearOptions bad;
    bad.flip_explicit_potential = true;
    auto u = solve_linear(g, Potential::uniform(5.0), &f, nullptr, Direction::Forward, bad);
    const int k0 = static_cast<int>(std::ceil(0.5 / g->dt())) + 1;
    EXPECT_GT(std::abs(l2_norm_at(u, g->steps()) / l2_norm_at(u, k0) - 1), 1e-6);
}

TEST(SolveNonlinear, ZeroBetaIsOneLinearSolve) {
    auto g = make_grid(Domain::unit_square(), {12, 12}, 1.0, 40);
    BoundaryData f = pulse(g, 0.9, 2, 1);
    auto r = solve_nonlinear(g, Potential::uniform(0.5), Potential::zero(), f);
    auto u = solve_linear(g, Potential::uniform(0.5), &f, nullptr, Direction::Forward);
    EXPECT_EQ(r.iterations, 1);
    SpaceTimeField d = r.u;
    d -= u;
    EXPECT_EQ(l2_norm(d), 0.0);
}

TEST(SolveNonlinear, ZeroDataGivesZero) {
    auto g = make_grid(Domain::unit_square(), {12, 12}, 1.0, 40);
    BoundaryData f(g);
    auto r = solve_nonlinear(g, Potential::uniform(0.5), bump(1.0), f);
    EXPECT_EQ(r.u.max_abs(), 0.0);
}

TEST(SolveNonlinear, ExpansionSlopes) {
    auto g = make_grid(Domain::unit_square(), {16, 16}, 1.0, 80);
    Potential q = Potential::uniform(0.7), beta = bump(1.0);
    BoundaryData f = pulse(g, 0.9, 2, 1);
    auto U1 = solve_linear(g, q, &f, nullptr, Direction::Forward);
    auto W20 = solve_w(q, beta, U1, U1);
    std::vector<double> es{1e-2, std::pow(10.0, -1.5), 1e-1}, r1, r2;
    for (double e : es) {
        auto u = solve_nonlinear(g, q, beta, cplx(e) * f).u;
        SpaceTimeField a = U1, w = W20;
        a *= e;
        w *= 0.5 * e * e;
        u -= a;
        r1.push_back(l2_norm(u));
        u -= w;
        r2.push_back(l2_norm(u));
    }
    EXPECT_NEAR(fx::fit_slope(es, r1), 2.0, 0.2);
    EXPECT_NEAR(fx::fit_slope(es, r2), 3.0, 0.3);
}

TEST(SolveNonlinear, LargeDataDiverges) {
    auto g = make_grid(Domain::unit_square(), {8, 8}, 1.0, 20);
    BoundaryData f = pulse(g, 0.9, 2, 1);
    EXPECT_THROW(solve_nonlinear(g, Potential::zero(), bump(50.0), cplx(200) * f), SolverError);
}

TEST(NeumannTraceTest, AffineFieldOnOneFace) {
    auto g = make_grid(Domain::unit_square(), {10, 10}, 1.0, 5);
    auto u = field_fn(g, [](double, const Vec3& x) { return cplx(x[0]); });
    auto tr = neumann_trace(u, BoundaryPatch::from_faces({1}));
    ASSERT_GT(tr.count(), 0);
    for (auto v : tr.raw()) EXPECT_NEAR(std::abs(v - 1.0), 0.0, 1e-12);
}

TEST(NeumannTraceTest, ConstantFieldHasZeroTrace) {
    auto g = make_grid(Domain::unit_square(), {10, 10}, 1.0, 5);
    auto u = field_fn(g, [](double, const Vec3&) { return cplx(3.0, -1.0); });
    auto tr = neumann_trace(u, BoundaryPatch::full());
    for (auto v : tr.raw()) EXPECT_LT(std::abs(v), 1e-12);
}

TEST(NeumannTraceTest, SineSecondOrder) {
    // outward derivative of sin(πx1) on {x1 = 0} is -π
    auto err = [](int c) {
        auto g = make_grid(Domain::unit_square(), {c, c}, 1.0, 2);
        auto u = field_fn(g, [](double, const Vec3& x) { return cplx(std::sin(kPi * x[0])); });
        auto tr = neumann_trace(u, BoundaryPatch::from_faces({0}));
        double e = 0;
        for (auto v : tr.raw()) e = std::max(e, std::abs(std::abs(v) - kPi));
        return e;
    };
    double a = err(16), b = err(32);
    EXPECT_LT(b, 20.0 / (32 * 32));
    EXPECT_NEAR(std::log2(a / b), 2.0, 0.2);
}

TEST(DNMap, ZeroDataZeroTraceForAnyBeta) {
    auto g = make_grid(Domain::unit_square(), {10, 10}, 1.0, 20);
    BoundaryData f(g);
    EXPECT_EQ(dn_map(g, Potential::uniform(0.5), Potential::zero(), f, BoundaryPatch::full()).l2_norm(), 0.0);
    EXPECT_EQ(dn_map(g, Potential::uniform(0.5), bump(2.0), f, BoundaryPatch::full()).l2_norm(), 0.0);
}

TEST(DNMap, SameBetaSameTrace) {
    auto g = make_grid(Domain::unit_square(), {10, 10}, 1.0, 30);
    BoundaryData f = pulse(g, 0.9, 1, 2);
    auto a = dn_map(g, Potential::uniform(0.5), bump(1.0), f, BoundaryPatch::full());
    auto b = dn_map(g, Potential::uniform(0.5), bump(1.0), f, BoundaryPatch::full());
    EXPECT_EQ(a.raw(), b.raw());
}

TEST(DNMap, LinearWhenBetaVanishes) {
    auto g = make_grid(Domain::unit_square(), {12, 12}, 1.0, 30);
    BoundaryData f1 = pulse(g, 0.9, 1, 2), f2 = pulse(g, 0.7, -2, 1);
    auto lam = [&](const BoundaryData& f) { return dn_map(g, Potential::uniform(0.5), Potential::zero(), f, BoundaryPatch::full()); };
    NeumannTrace d = lam(cplx(2, 1) * f1 + f2);
    d -= cplx(2, 1) * lam(f1);
    d -= lam(f2);
    EXPECT_LT(d.l2_norm(), 1e-8 * lam(f1).l2_norm());
}

TEST(DNMap, InteriorBetaEnterAtSecondOrder) {
    auto g = make_grid(Domain::unit_square(), {16, 16}, 1.0, 60);
    BoundaryData f = pulse(g, 0.9, 2, 1);
    Potential q = Potential::uniform(0.5), beta = bump(1.0, Vec3(0.5, 0.5, 0), 0.25);
    std::vector<double> es{1e-2, std::pow(10.0, -1.5), 1e-1}, d;
    for (double e : es) {
        NeumannTrace a = dn_map(g, q, beta, cplx(e) * f, BoundaryPatch::full());
        a -= dn_map(g, q, Potential::zero(), cplx(e) * f, BoundaryPatch::full());
        d.push_back(a.l2_norm());
    }
    EXPECT_NEAR(fx::fit_slope(es, d), 2.0, 0.1);
}

TEST(DiscreteNorm, Examples) {
    auto g = make_grid(Domain::unit_square(), {32, 32}, 1.0, 32);
    SpaceTimeField z(g);
    for (int s : {0, 1, 2, 4}) EXPECT_EQ(discrete_norm(z, s), 0.0);
    auto one = field_fn(g, [](double, const Vec3&) { return cplx(1.0); });
    EXPECT_NEAR(discrete_norm(one, 0), 1.0, 1e-12);
    auto sn = field_fn(g, [](double, const Vec3& x) { return cplx(std::sin(kPi * x[0])); });
    EXPECT_NEAR(discrete_norm(sn, 0), 1 / std::sqrt(2.0), 1e-12);
    EXPECT_THROW(discrete_norm(z, -1), NormError);
}

TEST(Admissibility, Examples) {
    auto g = make_grid(Domain::unit_square(), {16, 16}, 1.0, 64);
    BoundaryData z(g);
    EXPECT_TRUE(admissibility_check(z, 1.0, 1).admissible);
    BoundaryData c = boundary_fn(g, [](double, const Vec3&) { return cplx(1.0); });
    auto a = admissibility_check(c, 1e9, 1);
    EXPECT_FALSE(a.admissible);
    EXPECT_NE(a.reason.find("compatibility"), std::string::npos);
    BoundaryData f = boundary_fn(g, [](double t, const Vec3& x) { return smooth_step((t - 0.1) / 0.3) * std::exp(cplx(0, 2 * x[0] - 3 * t)); });
    auto small = admissibility_check(cplx(1e-3) * f, 1e6, 1);
    EXPECT_TRUE(small.admissible) << small.reason;
    auto big = admissibility_check(f, 1e-3, 1);
    EXPECT_FALSE(big.admissible);
    EXPECT_NE(big.reason.find("norm"), std::string::npos);
}
