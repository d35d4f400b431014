#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace nlsdn;

TEST(LineHits, AxisLineOnUnitSquare) {
    auto [a, b] = line_boundary_hits(Domain::unit_square(), Line{Vec3(0.5, 0.5, 0), Vec3(1, 0, 0)});
    EXPECT_LT((a - Vec3(0, 0.5, 0)).norm(), 1e-14);
    EXPECT_LT((b - Vec3(1, 0.5, 0)).norm(), 1e-14);
}

TEST(LineHits, DiagonalHitsCorners) {
    auto [a, b] = line_boundary_hits(Domain::unit_square(), Line{Vec3(0.5, 0.5, 0), Vec3(1, 1, 0)});
    EXPECT_LT(a.norm(), 1e-14);
    EXPECT_LT((b - Vec3(1, 1, 0)).norm(), 1e-14);
}

TEST(LineHits, BallGivesAntipodalPoints) {
    for (int n : {2, 3}) {
        Domain ball = Domain::ball(n, 1.0);
        Vec3 w = n == 3 ? Vec3(0.3, -0.4, 0.8) : Vec3(0.6, -0.8, 0);
        auto [a, b] = line_boundary_hits(ball, Line{Vec3::Zero(), w});
        EXPECT_NEAR(a.norm(), 1.0, 1e-14);
        EXPECT_NEAR(b.norm(), 1.0, 1e-14);
        EXPECT_LT((a + b).norm(), 1e-14);
        EXPECT_NEAR((b - a).normalized().dot(w.normalized()), 1.0, 1e-14);
    }
}

TEST(LineHits, RejectsExteriorPointAndZeroDirection) {
    EXPECT_THROW(line_boundary_hits(Domain::unit_square(), Line{Vec3(1.5, 0.5, 0), Vec3(1, 0, 0)}), GeometryError);
    EXPECT_THROW(line_boundary_hits(Domain::unit_square(), Line{Vec3(0.5, 0.5, 0), Vec3::Zero()}), GeometryError);
}

TEST(Visibility, FullBoundaryContainsEveryInteriorPoint) {
    for (double x : {0.1, 0.5, 0.93})
        for (double y : {0.07, 0.5, 0.8}) EXPECT_TRUE(in_visibility_set(Domain::unit_square(), BoundaryPatch::full(), Vec3(x, y, 0), 64).member);
}

TEST(Visibility, SingleEdgeIsNotEnough) {
    EXPECT_FALSE(in_visibility_set(Domain::unit_square(), BoundaryPatch::from_faces({2}), Vec3(0.5, 0.5, 0), 64).member);
}

TEST(Visibility, ThreeEdgesWithDiagonalWitness) {
    BoundaryPatch g = BoundaryPatch::from_faces({0, 1, 2});
    auto v = in_visibility_set(Domain::unit_square(), g, Vec3(0.5, 0.1, 0), 64);
    ASSERT_TRUE(v.member);
    EXPECT_NEAR(v.omega1.dot(v.omega2), 0.0, 1e-14);
    // every witness line exits through the three edges, never through {x2 = 1}
    for (Vec3 w : {v.omega1, v.omega2, Vec3(v.omega1 + v.omega2)}) {
        auto [a, b] = line_boundary_hits(Domain::unit_square(), Line{Vec3(0.5, 0.1, 0), w});
        EXPECT_TRUE(g.contains(Domain::unit_square(), a));
        EXPECT_TRUE(g.contains(Domain::unit_square(), b));
    }
}

TEST(Visibility, BallCapMembership) {
    Domain ball = Domain::ball(2, 1.0);
    BoundaryPatch cap;
    cap.cap_direction = Vec3(1, 0, 0);
    cap.cap_cos = -0.2;
    EXPECT_TRUE(in_visibility_set(ball, BoundaryPatch::full(), Vec3(0.2, 0.1, 0), 64).member);
    bool near_far_side = in_visibility_set(ball, cap, Vec3(-0.9, 0, 0), 64).member;
    EXPECT_FALSE(near_far_side);
}

TEST(Visibility, MonotoneInPatch) {
    BoundaryPatch small = BoundaryPatch::from_faces({0, 1, 2}), big = BoundaryPatch::full();
    for (int i = 1; i < 10; ++i)
        for (int j = 1; j < 10; ++j) {
            Vec3 p(i / 10.0, j / 10.0, 0);
            if (in_visibility_set(Domain::unit_square(), small, p, 64).member)
                EXPECT_TRUE(in_visibility_set(Domain::unit_square(), big, p, 64).member);
        }
}

TEST(Cutoffs, TimePlateauExactValues) {
    TimePlateau th(0.1, 1.0);
    EXPECT_EQ(th(0.0), 0.0);
    EXPECT_EQ(th(0.1), 0.0);
    EXPECT_EQ(th(0.5), 1.0);
    for (int k = 0; k <= 1000; ++k) {
        double t = k / 1000.0;
        if (t <= 0.1 || t >= 0.9) EXPECT_EQ(th(t), 0.0) << t;
        if (t >= 0.2 + 1e-12 && t <= 0.8 - 1e-12) EXPECT_NEAR(th(t), 1.0, 1e-15) << t;
    }
}

TEST(Cutoffs, TimePlateauDerivativeScalesLikeInverseH) {
    std::vector<double> scaled;
    for (double h : {0.05, 0.025, 0.0125}) {
        TimePlateau th(h, 1.0);
        double m = 0;
        const int Q = 20000;
        for (int k = 1; k < Q; ++k) {
            double t = k / double(Q), d = 1e-7;
            m = std::max(m, std::abs(th(t + d) - th(t - d)) / (2 * d));
        }
        scaled.push_back(m * h);
    }
    for (double s : scaled) EXPECT_NEAR(s / scaled[0], 1.0, 0.02);
}

TEST(Cutoffs, TimePlateauRejectsWideCutoff) { EXPECT_THROW(TimePlateau(0.3, 1.0), GeometryError); }

TEST(Cutoffs, JetDerivativeMatchesFiniteDifference) {
    TimePlateau th(0.1, 1.0);
    for (double t : {0.12, 0.15, 0.18, 0.85}) {
        double fd = (th(t + 1e-6) - th(t - 1e-6)) / 2e-6;
        EXPECT_NEAR(th.derivative(t, 1), fd, 1e-5 * (1 + std::abs(fd)));
    }
}

TEST(Cutoffs, BoundaryCutoffKeepsInteriorDifferences) {
    Domain sq = Domain::unit_square();
    BoundaryCutoff chi(sq, 0.2);
    // β1 − β2 supported in the bump of radius 0.25 at the centre, away from O = {dist < 0.2}
    Potential d = fx::bump(1.0, Vec3(0.5, 0.5, 0), 0.25);
    for (int i = 0; i <= 50; ++i)
        for (int j = 0; j <= 50; ++j) {
            Vec3 x(i / 50.0, j / 50.0, 0);
            EXPECT_EQ(chi(x) * d(0, x).real(), d(0, x).real());
        }
    EXPECT_EQ(chi(Vec3(0.04, 0.5, 0)), 0.0);
    EXPECT_EQ(chi(Vec3(0.5, 0.5, 0)), 1.0);
    EXPECT_TRUE(chi.in_shell(Vec3(0.08, 0.5, 0), 2) && !chi.in_shell(Vec3(0.08, 0.5, 0), 3));
}

TEST(Cutoffs, TubeCutoff) {
    TubeCutoff c(0.2);
    EXPECT_EQ(c(0.0), 1.0);
    EXPECT_EQ(c(0.1), 1.0);
    EXPECT_EQ(c(0.2), 0.0);
    EXPECT_GT(c(0.15), 0.0);
    EXPECT_LT(c(0.15), 1.0);
}

TEST(GridTest, BoundaryAndWeights) {
    auto g = make_grid(Domain::unit_square(), {10, 10}, 1.0, 20);
    EXPECT_EQ(g->num_nodes(), 121);
    EXPECT_EQ(static_cast<int>(g->boundary().size()), 40);
    double vol = 0;
    for (int i = 0; i < g->num_nodes(); ++i) vol += g->volume_weight(i);
    EXPECT_NEAR(vol, 1.0, 1e-12);
    EXPECT_NEAR(BoundaryPatch::full().measure(*g), 4.0, 1e-12);
}
