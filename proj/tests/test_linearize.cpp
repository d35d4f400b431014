#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace nlsdn;
using fx::pulse;

namespace {

struct Rig {
    GridPtr g;
    Potential q = Potential::uniform(0.5);
    BoundaryData f1, f2;
    explicit Rig(int cells = 16, int steps = 80) : g(make_grid(Domain::unit_square(), {cells, cells}, 1.0, steps)) {
        f1 = pulse(g, 0.9, 2, 1);
        f2 = pulse(g, 0.9, -1, 2);
    }
    DNEvaluator dn(const Potential& beta, const BoundaryPatch& gam = BoundaryPatch::full()) const {
        auto m = std::make_shared<Model>(Model{g, q, beta, gam, {}});
        return [m](const BoundaryData& f) { return m->dn(f); };
    }
};

// adjoint probe data: vanishes near t = T so the backward solve starts from rest
BoundaryData late_pulse(const GridPtr& g, double k1, double k2) {
    return fx::boundary_fn(g, [=](double t, const Vec3& x) {
        double on = smooth_step((t - 0.1) / 0.2) * smooth_step((0.9 - t) / 0.2);
        return on * std::exp(cplx(0, k1 * x[0] + k2 * x[1] + 2 * t));
    });
}

}  // namespace

TEST(SecondDifference, LinearModelVanishes) {
    Rig s;
    auto dn = s.dn(Potential::zero());
    for (auto [e1, e2] : std::vector<std::pair<double, double>>{{0.1, 0.1}, {0.01, 0.05}, {1.0, 0.3}}) {
        auto r = second_difference_dn(dn, s.f1, s.f2, e1, e2);
        double scale = (dn(s.f1).l2_norm() + dn(s.f2).l2_norm()) / std::min(e1, e2);
        EXPECT_LT(r.d2.l2_norm(), 1e-10 * scale);
    }
}

TEST(SecondDifference, RecomputeMatchesStoredRecords) {
    Rig s;
    auto r = second_difference_dn(s.dn(fx::bump(1.0)), s.f1, s.f2, 0.05, 0.05);
    EXPECT_EQ((r.recompute() - r.d2).l2_norm(), 0.0);
    EXPECT_FALSE(r.unequal_scales);
}

TEST(SecondDifference, SymmetricUnderSwap) {
    Rig s;
    auto dn = s.dn(fx::bump(1.0));
    auto a = second_difference_dn(dn, s.f1, s.f2, 0.05, 0.02), b = second_difference_dn(dn, s.f2, s.f1, 0.02, 0.05);
    EXPECT_LT((a.d2 - b.d2).l2_norm(), 1e-10 * a.d2.l2_norm());
}

TEST(SecondDifference, DoublingBetaDoublesLimit) {
    Rig s;
    auto extrap = [&](const Potential& b) {
        auto dn = s.dn(b);
        NeumannTrace a = second_difference_dn(dn, s.f1, s.f2, 0.02, 0.02).d2;
        NeumannTrace h = second_difference_dn(dn, s.f1, s.f2, 0.01, 0.01).d2;
        return cplx(2.0) * h - a;
    };
    NeumannTrace one = extrap(fx::bump(1.0)), two = extrap(fx::bump(2.0));
    EXPECT_LT((two - cplx(2.0) * one).l2_norm(), 1e-3 * two.l2_norm());
}

TEST(SecondDifference, ConvergesToWTraceAtRateEps) {
    Rig s(24, 120);
    Potential beta = fx::bump(1.0);
    auto dn = s.dn(beta);
    auto U1 = solve_linear(s.g, s.q, &s.f1, nullptr, Direction::Forward);
    auto U2 = solve_linear(s.g, s.q, &s.f2, nullptr, Direction::Forward);
    NeumannTrace oracle = neumann_trace(solve_w(s.q, beta, U1, U2), BoundaryPatch::full());
    std::vector<double> es{1e-2, std::pow(10.0, -1.5), 1e-1}, err;
    for (double e : es) err.push_back((second_difference_dn(dn, s.f1, s.f2, e, e).d2 - oracle).l2_norm());
    EXPECT_NEAR(fx::fit_slope(es, err), 1.0, 0.2);
}

TEST(SecondDifference, FlagsUnequalScalesAndRejectsInadmissibleData) {
    Rig s;
    auto dn = s.dn(fx::bump(1.0));
    EXPECT_TRUE(second_difference_dn(dn, s.f1, s.f2, 1e-3, 0.1).unequal_scales);
    SecondDifferenceOptions o;
    o.lambda = 1e-6;
    EXPECT_THROW(second_difference_dn(dn, s.f1, s.f2, 0.1, 0.1, o), IdentityError);
    EXPECT_THROW(second_difference_dn(dn, s.f1, s.f2, 0.0, 0.1), IdentityError);
}

TEST(SolveW, ZeroBetaAndSymmetry) {
    Rig s;
    auto U1 = solve_linear(s.g, s.q, &s.f1, nullptr, Direction::Forward);
    auto U2 = solve_linear(s.g, s.q, &s.f2, nullptr, Direction::Forward);
    EXPECT_EQ(solve_w(s.q, Potential::zero(), U1, U2).max_abs(), 0.0);
    auto a = solve_w(s.q, fx::bump(1.0), U1, U2), b = solve_w(s.q, fx::bump(1.0), U2, U1);
    SpaceTimeField d = a;
    d -= b;
    EXPECT_GT(a.max_abs(), 0.0);
    EXPECT_LT(d.max_abs(), 1e-12 * a.max_abs());
}

TEST(Identity, EqualBetasGiveZero) {
    Rig s;
    auto U1 = solve_linear(s.g, s.q, &s.f1, nullptr, Direction::Forward);
    auto U0 = solve_linear(s.g, s.q, &s.f2, nullptr, Direction::Adjoint);
    EXPECT_EQ(integral_identity_defect(s.q, Potential::uniform(2.0), Potential::uniform(2.0), U1, U1, U0), cplx(0));
    auto r = integral_identity_defect_full(s.q, fx::bump(1.0), fx::bump(1.0), U1, U1, U0, std::nullopt);
    EXPECT_EQ(r.defect, cplx(0));
}

TEST(Identity, BoundaryAndCutoffForms) {
    auto g = make_grid(Domain::unit_square(), {32, 32}, 1.0, 80);
    Potential q = Potential::uniform(0.5);
    auto mk = [&](Vec3 w, GOSpec::Flavor fl, double tau, Vec3 xi, Direction dir) {
        GOSpec sp;
        sp.omega = w;
        sp.rho = 4;
        sp.flavor = fl;
        sp.tau = tau;
        sp.xi = xi;
        sp.h = 0.1;
        return complete_to_solution(build_go(sp, q, g).sample(g), q, dir).U;
    };
    auto U1 = mk(Vec3(1, 0, 0), GOSpec::Flavor::Plain, 0, Vec3::Zero(), Direction::Forward);
    auto U2 = mk(Vec3(0, 1, 0), GOSpec::Flavor::Plain, 0, Vec3::Zero(), Direction::Forward);
    auto U0 = mk(Vec3(1, 1, 0), GOSpec::Flavor::Modulated, 2, Vec3(1, -1, 0), Direction::Adjoint);
    Potential b = fx::bump(1.0);
    auto plain = integral_identity_defect_full(q, b, Potential::zero(), U1, U2, U0, std::nullopt);
    auto cut = integral_identity_defect_full(q, b, Potential::zero(), U1, U2, U0, BoundaryCutoff(Domain::unit_square(), 0.15));
    EXPECT_LE(std::abs(plain.defect) / plain.scale, 1e-2);
    EXPECT_LE(std::abs(cut.defect) / cut.scale, 1e-10);
    // an unresolved transition is refused
    EXPECT_THROW(integral_identity_defect_full(q, b, Potential::zero(), U1, U2, U0, BoundaryCutoff(Domain::unit_square(), 0.05)),
                 IdentityError);
}

TEST(Identity, TraceHypothesisChecked) {
    Rig s;
    auto U1 = solve_linear(s.g, s.q, &s.f1, nullptr, Direction::Forward);
    auto U0 = solve_linear(s.g, s.q, &s.f2, nullptr, Direction::Adjoint);
    IdentityHypotheses h;
    h.gamma = BoundaryPatch::from_faces({0});
    EXPECT_THROW(integral_identity_defect_full(s.q, fx::bump(1.0), Potential::zero(), U1, U1, U0, std::nullopt, h), IdentityError);
}

TEST(Identity, VolumePairingConjugates) {
    Rig s;
    auto U1 = solve_linear(s.g, s.q, &s.f1, nullptr, Direction::Forward);
    auto U2 = solve_linear(s.g, s.q, &s.f2, nullptr, Direction::Forward);
    auto U0 = solve_linear(s.g, s.q, &s.f2, nullptr, Direction::Adjoint);
    auto cj = [](SpaceTimeField u) {
        for (auto& v : u.raw()) v = std::conj(v);
        return u;
    };
    cplx a = volume_pairing(fx::bump(1.0), U1, U2, U0);
    cplx b = volume_pairing(fx::bump(1.0), cj(U1), cj(U2), cj(U0));
    EXPECT_LT(std::abs(b - std::conj(a)), 1e-12 * std::abs(a));
}

TEST(MeasuredPairing, MatchesVolumeIntegral) {
    Rig s(32, 160);
    Potential beta = fx::bump(1.0);
    BoundaryData f0 = late_pulse(s.g, 1, 1);
    auto U1 = solve_linear(s.g, s.q, &s.f1, nullptr, Direction::Forward);
    auto U2 = solve_linear(s.g, s.q, &s.f2, nullptr, Direction::Forward);
    auto U0 = solve_linear(s.g, s.q, &f0, nullptr, Direction::Adjoint);
    auto r = second_difference_dn(s.dn(beta), s.f1, s.f2, 1e-2, 1e-2);
    cplx J = measured_pairing(r.d2, f0);
    cplx V = -volume_pairing(beta, U1, U2, U0);
    EXPECT_LE(std::abs(J - V) / std::abs(V), 0.05) << J << " vs " << V;
}

TEST(MeasuredPairing, ZeroForEqualModelsAndAntilinearInProbe) {
    Rig s;
    auto dn = s.dn(fx::bump(1.0));
    auto r1 = second_difference_dn(dn, s.f1, s.f2, 0.05, 0.05), r2 = second_difference_dn(dn, s.f1, s.f2, 0.05, 0.05);
    BoundaryData f0 = late_pulse(s.g, 1, 1), g0 = late_pulse(s.g, -2, 1);
    EXPECT_EQ(measured_pairing(r1, r2, f0), cplx(0));
    const cplx a(0.7, -1.2), b(2.0, 0.5);
    cplx lhs = measured_pairing(r1.d2, a * f0 + b * g0);
    cplx rhs = std::conj(a) * measured_pairing(r1.d2, f0) + std::conj(b) * measured_pairing(r1.d2, g0);
    EXPECT_LT(std::abs(lhs - rhs), 1e-12 * std::abs(lhs));
}

TEST(MeasuredPairing, IgnoresDataOutsidePatch) {
    Rig s;
    BoundaryPatch gam = BoundaryPatch::from_faces({0, 1, 2});
    auto r = second_difference_dn(s.dn(fx::bump(1.0), gam), s.f1, s.f2, 0.05, 0.05);
    BoundaryData f0 = late_pulse(s.g, 1, 1);
    BoundaryData extra = fx::boundary_fn(s.g, [](double t, const Vec3& x) {
        return x[1] > 1 - 1e-12 && x[0] > 1e-12 && x[0] < 1 - 1e-12 ? cplx(std::sin(3 * t), 1.0) : cplx(0);
    });
    ASSERT_GT(extra.max_abs(), 0.0);
    EXPECT_EQ(measured_pairing(r.d2, f0 + extra), measured_pairing(r.d2, f0));
}
