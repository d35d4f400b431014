#pragma once

#include "nlsdn/beam.hpp"
#include "nlsdn/go.hpp"
#include "nlsdn/solver.hpp"

namespace nlsdn {

struct Completion {
    SpaceTimeField U;      // exact discrete solution with U|Σ = v|Σ
    SpaceTimeField r;      // U - v
    BoundaryData trace;    // v|Σ
    double r_l2 = 0, v_l2 = 0;
};

// Largest Crank–Nicolson residual of (i∂t+Δ+q)U = F over interior nodes and steps.
inline double discrete_residual(const SpaceTimeField& U, const Potential& q, const SpaceTimeField* F = nullptr,
                                Direction dir = Direction::Forward) {
    const Grid& g = *U.grid();
    const Potential qq = dir == Direction::Adjoint ? q.conj() : q;
    std::vector<cplx> qa = qq.sample_space(g, 0.0), qb = qa;
    const double dt = g.dt();
    double m = 0;
    for (int k = 0; k + 1 < g.time_levels(); ++k) {
        if (!qq.time_independent) {
            qa = qq.sample_space(g, g.time(k));
            qb = qq.sample_space(g, g.time(k + 1));
        }
        const cplx* a = U.level(k);
        const cplx* b = U.level(k + 1);
        for (int i : g.interior()) {
            cplx r = cplx(0, 1) * (b[i] - a[i]) / dt +
                     0.5 * (detail::laplacian_at(g, a, i) + qa[i] * a[i] + detail::laplacian_at(g, b, i) + qb[i] * b[i]);
            if (F) r -= 0.5 * (F->at(k, i) + F->at(k + 1, i));
            m = std::max(m, std::abs(r));
        }
    }
    return m;
}

// U = v + r with (i∂t+Δ+q)r = -(i∂t+Δ+q)v and r = 0 on Σ and at the free endpoint.
inline Completion complete_to_solution(const SpaceTimeField& v, const Potential& q, Direction dir,
                                       const LinearOptions& opt = {}) {
    Completion c;
    c.trace = BoundaryData::trace_of(v);
    c.U = solve_linear(v.grid(), q, &c.trace, nullptr, dir, opt);
    c.U.set_label(dir == Direction::Forward ? "completed-forward" : "completed-adjoint");
    c.r = c.U - v;
    c.r_l2 = l2_norm(c.r);
    c.v_l2 = l2_norm(v);
    return c;
}

}  // namespace nlsdn
