#pragma once

#include <future>
#include <optional>

#include "nlsdn/solver.hpp"

namespace nlsdn {

class IdentityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SecondDifferenceResult {
    NeumannTrace d2;
    double eps1 = 0, eps2 = 0;
    NeumannTrace combined, single1, single2;  // Λ(ε1f1+ε2f2), Λ(ε1f1), Λ(ε2f2)
    bool unequal_scales = false;

    // recompute the three-term combination from the stored records
    NeumannTrace recompute() const {
        NeumannTrace r = combined - single1 - single2;
        r *= 1.0 / (eps1 * eps2);
        return r;
    }
};

struct SecondDifferenceOptions {
    std::optional<double> lambda;  // admissibility threshold for ε1f1+ε2f2
    int kappa = 1;
    double scale_ratio_flag = 10.0;
    bool concurrent = false;
};

// (Λ(ε1f1+ε2f2) - Λ(ε1f1) - Λ(ε2f2)) / (ε1ε2)
inline SecondDifferenceResult second_difference_dn(const DNEvaluator& dn, const BoundaryData& f1, const BoundaryData& f2,
                                                   double eps1, double eps2, const SecondDifferenceOptions& opt = {}) {
    if (eps1 * eps2 == 0) throw IdentityError("second difference needs nonzero eps1, eps2");
    require_same_grid(f1.grid(), f2.grid());
    BoundaryData g1 = cplx(eps1) * f1, g2 = cplx(eps2) * f2, g12 = g1 + g2;
    if (opt.lambda) {
        auto a = admissibility_check(g12, *opt.lambda, opt.kappa);
        if (!a.admissible) throw IdentityError("combined data inadmissible: " + a.reason);
    }
    SecondDifferenceResult r;
    r.eps1 = eps1;
    r.eps2 = eps2;
    r.unequal_scales = std::max(std::abs(eps1 / eps2), std::abs(eps2 / eps1)) > opt.scale_ratio_flag;
    if (opt.concurrent) {
        auto a = std::async(std::launch::async, dn, std::cref(g12));
        auto b = std::async(std::launch::async, dn, std::cref(g1));
        r.single2 = dn(g2);
        r.combined = a.get();
        r.single1 = b.get();
    } else {
        r.combined = dn(g12);
        r.single1 = dn(g1);
        r.single2 = dn(g2);
    }
    r.d2 = r.recompute();
    return r;
}

// (i∂t+Δ+q)W = -2β Ua Ub, zero boundary and initial data
inline SpaceTimeField solve_w(const Potential& q, const Potential& beta, const SpaceTimeField& Ua, const SpaceTimeField& Ub,
                              const LinearOptions& opt = {}) {
    require_same_grid(Ua.grid(), Ub.grid());
    const GridPtr& gp = Ua.grid();
    const Grid& g = *gp;
    if (beta.is_zero()) return SpaceTimeField(gp, "W");
    std::vector<cplx> bs;
    SpaceTimeField bf;
    if (beta.time_independent)
        bs = beta.sample_space(g, 0.0);
    else
        bf = beta.sample(gp);
    std::vector<cplx> buf[2];
    int lev[2] = {-1, -1}, last = -1;
    const int N = g.num_nodes();
    SourceFn src = [&](int k) -> const cplx* {
        for (int s = 0; s < 2; ++s)
            if (lev[s] == k) {
                last = k;
                return buf[s].data();
            }
        const int s = lev[0] == last ? 1 : 0;
        buf[s].resize(N);
        const cplx* a = Ua.level(k);
        const cplx* b = Ub.level(k);
        const cplx* be = beta.time_independent ? bs.data() : bf.level(k);
        for (int i = 0; i < N; ++i) buf[s][i] = -2.0 * be[i] * a[i] * b[i];
        lev[s] = k;
        last = k;
        return buf[s].data();
    };
    SpaceTimeField W = march_linear(gp, q, nullptr, src, Direction::Forward, opt);
    W.set_label("W");
    return W;
}

// ∫_Q 2β U1 U2 conj(U0)
inline cplx volume_pairing(const Potential& beta, const SpaceTimeField& U1, const SpaceTimeField& U2, const SpaceTimeField& U0,
                           double* abs_integral = nullptr) {
    const Grid& g = *U1.grid();
    std::vector<cplx> bs;
    if (beta.time_independent) bs = beta.sample_space(g, 0.0);
    cplx s = 0;
    double sa = 0;
    for (int k = 0; k < g.time_levels(); ++k) {
        if (!beta.time_independent) bs = beta.sample_space(g, g.time(k));
        cplx sk = 0;
        double ak = 0;
        const cplx* a = U1.level(k);
        const cplx* b = U2.level(k);
        const cplx* c = U0.level(k);
        for (int i = 0; i < g.num_nodes(); ++i) {
            if (bs[i] == cplx(0)) continue;
            cplx v = 2.0 * bs[i] * a[i] * b[i] * std::conj(c[i]);
            sk += g.volume_weight(i) * v;
            ak += g.volume_weight(i) * std::abs(v);
        }
        s += g.time_weight(k) * sk;
        sa += g.time_weight(k) * ak;
    }
    if (abs_integral) *abs_integral = sa;
    return s;
}

// ∫_Q [Δ_h, χ] W conj(U0), commutator with the solver's Laplacian
inline cplx commutator_pairing(const BoundaryCutoff& chi, const SpaceTimeField& W, const SpaceTimeField& U0) {
    const Grid& g = *W.grid();
    std::vector<double> c(g.num_nodes(), 0.0);
    for (int i = 0; i < g.num_nodes(); ++i)
        if (g.type(i) != Grid::NodeType::Inactive) c[i] = chi(g.coord(i));
    std::vector<cplx> cw(g.num_nodes());
    cplx s = 0;
    for (int k = 0; k < g.time_levels(); ++k) {
        const cplx* w = W.level(k);
        const cplx* u = U0.level(k);
        for (int i = 0; i < g.num_nodes(); ++i) cw[i] = c[i] * w[i];
        cplx sk = 0;
        for (int i : g.interior()) {
            if (c[i] == 1.0 && c[i - 1] == 1.0 && c[i + 1] == 1.0 && c[i - g.stride(1)] == 1.0 && c[i + g.stride(1)] == 1.0 &&
                (g.n() == 2 || (c[i - g.stride(2)] == 1.0 && c[i + g.stride(2)] == 1.0)))
                continue;
            cplx comm = detail::laplacian_at(g, cw.data(), i) - c[i] * detail::laplacian_at(g, w, i);
            sk += g.volume_weight(i) * comm * std::conj(u[i]);
        }
        s += g.time_weight(k) * sk;
    }
    return s;
}

struct IdentityHypotheses {
    std::optional<BoundaryPatch> gamma;  // traces of U1, U2, U0 must vanish outside Γ
    double trace_tol = 1e-8;
};

struct DefectResult {
    cplx defect = 0;
    cplx volume = 0;     // ∫ 2β U1 U2 conj(U0)
    cplx correction = 0; // boundary pairing (no cutoff) or commutator term (with cutoff)
    double scale = 0;    // ∫ |2β U1 U2 U0|
};

// Without χ: ∫2βU1U2Ū0 - ∫_Σ Ū0 ∂νW. With χ: ∫2βU1U2Ū0 + ∫[Δ,χ]WŪ0. β = β1 - β2, (i∂t+Δ+q)W = 2βU1U2.
inline DefectResult integral_identity_defect_full(const Potential& q, const Potential& beta1, const Potential& beta2,
                                                  const SpaceTimeField& U1, const SpaceTimeField& U2, const SpaceTimeField& U0,
                                                  const std::optional<BoundaryCutoff>& chi, const IdentityHypotheses& hyp = {},
                                                  const LinearOptions& opt = {}) {
    require_same_grid(U1.grid(), U2.grid());
    require_same_grid(U1.grid(), U0.grid());
    const GridPtr& gp = U1.grid();
    const Grid& g = *gp;
    const Potential beta = beta1 - beta2;
    if (hyp.gamma) {
        for (const SpaceTimeField* u : {&U1, &U2, &U0}) {
            BoundaryData tr = BoundaryData::trace_of(*u);
            if (tr.max_outside(*hyp.gamma) > hyp.trace_tol * std::max(1.0, tr.max_abs()))
                throw IdentityError("probe trace is not supported in the boundary patch");
        }
    }
    if (chi) {
        // χ must vanish on the first interior layer, otherwise ∂ν(χW) leaks into the boundary
        for (int i : g.interior()) {
            bool edge = false;
            for (int d = 0; d < g.n(); ++d)
                edge = edge || g.type(i - g.stride(d)) == Grid::NodeType::Boundary || g.type(i + g.stride(d)) == Grid::NodeType::Boundary;
            if (edge && (*chi)(g.coord(i)) != 0.0)
                throw IdentityError("cutoff transition under-resolved: widen d0 or refine the grid");
        }
        const int levels = beta.time_independent ? 1 : g.time_levels();
        for (int k = 0; k < levels; ++k) {
            std::vector<cplx> bs = beta.sample_space(g, g.time(k));
            for (int i = 0; i < g.num_nodes(); ++i)
                if (g.type(i) != Grid::NodeType::Inactive && chi->in_shell(g.coord(i), 0) && bs[i] != cplx(0))
                    throw IdentityError("beta1 - beta2 must vanish on the boundary neighbourhood of the cutoff");
        }
    }
    DefectResult r;
    r.volume = volume_pairing(beta, U1, U2, U0, &r.scale);
    SpaceTimeField W = solve_w(q, beta, U1, U2, opt);
    W *= -1.0;  // solve_w gives (i∂t+Δ+q)W = -2βU1U2
    if (chi) {
        r.correction = commutator_pairing(*chi, W, U0);
        r.defect = r.volume + r.correction;
    } else {
        NeumannTrace dW = neumann_trace(W, BoundaryPatch::full());
        BoundaryData u0 = BoundaryData::trace_of(U0);
        r.correction = boundary_pairing(u0, dW);
        r.defect = r.volume - r.correction;
    }
    return r;
}

inline cplx integral_identity_defect(const Potential& q, const Potential& beta1, const Potential& beta2, const SpaceTimeField& U1,
                                     const SpaceTimeField& U2, const SpaceTimeField& U0,
                                     const std::optional<BoundaryCutoff>& chi = std::nullopt, const IdentityHypotheses& hyp = {}) {
    if (beta1.constant && beta2.constant && *beta1.constant == *beta2.constant) return 0.0;
    return integral_identity_defect_full(q, beta1, beta2, U1, U2, U0, chi, hyp).defect;
}

// J = ∫_{Σ♯} conj(f0) (D²_1 - D²_2); by the identity J ≈ -∫_Q 2(β1-β2) U1U2Ū0
inline cplx measured_pairing(const NeumannTrace& d2_beta1, const NeumannTrace& d2_beta2, const BoundaryData& f0) {
    d2_beta1.check_compatible(d2_beta2);
    return boundary_pairing(f0, d2_beta1 - d2_beta2);
}
inline cplx measured_pairing(const SecondDifferenceResult& r1, const SecondDifferenceResult& r2, const BoundaryData& f0) {
    return measured_pairing(r1.d2, r2.d2, f0);
}
// single-model form, the second model having β = 0 (linear DN map, D² = 0)
inline cplx measured_pairing(const NeumannTrace& d2_diff, const BoundaryData& f0) { return boundary_pairing(f0, d2_diff); }

}  // namespace nlsdn
