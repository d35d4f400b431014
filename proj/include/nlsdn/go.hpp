#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "nlsdn/beam.hpp"

namespace nlsdn {

// Plane-phase geometric optics probe v = e^{iΦ} Σ_k ρ^{-k} a_k with Φ = ρ(x·ω - ρ|ω|²t).
struct GOSpec {
    enum class Flavor { Plain, Modulated };
    Vec3 omega = Vec3(1, 0, 0);
    double rho = 10.0;
    Flavor flavor = Flavor::Plain;
    double tau = 0.0;
    Vec3 xi = Vec3::Zero();
    double h = 0.1;
    int N = 2;
    double T_star = 1.0;
    std::optional<Vec3> y;  // point on the reference hyperplane; domain centre if unset
};

// Auxiliary grid aligned with ω (n = 2): σ along ω̂, r along ω̂⊥, both centred at y.
struct GOAuxGrid {
    Vec3 y, u, e;
    double h = 0.01;
    int half = 0;  // nodes per axis = 2*half + 1
    std::vector<double> times;
    int side() const { return 2 * half + 1; }
    std::size_t plane() const { return static_cast<std::size_t>(side()) * side(); }
    Vec3 point(int i, int j) const { return y + (i - half) * h * u + (j - half) * h * e; }
};

// one amplitude on the auxiliary grid, [time][σ index][r index]
using GOAuxField = std::vector<cplx>;

// a_k = (i/2)∫_0^s L a_{k-1} along x + sω, by finite differences and cumulative trapezoid
inline GOAuxField go_transport_step(const GOAuxGrid& G, const GOAuxField& prev, const Potential& q, double speed) {
    const int S = G.side();
    const std::size_t P = G.plane();
    const int L = static_cast<int>(G.times.size());
    const double h = G.h;
    GOAuxField La(prev.size(), 0.0), out(prev.size(), 0.0);
    auto at = [&](const GOAuxField& f, int k, int i, int j) -> const cplx& {
        i = std::clamp(i, 0, S - 1);
        j = std::clamp(j, 0, S - 1);
        return f[k * P + static_cast<std::size_t>(i) * S + j];
    };
    const cplx I(0, 1);
    for (int k = 0; k < L; ++k) {
        const double t = G.times[k];
        for (int i = 0; i < S; ++i)
            for (int j = 0; j < S; ++j) {
                cplx dt;
                if (L < 3)
                    dt = 0;
                else if (k == 0)
                    dt = (-3.0 * at(prev, 0, i, j) + 4.0 * at(prev, 1, i, j) - at(prev, 2, i, j)) / (G.times[1] - G.times[0]) * 0.5;
                else if (k == L - 1)
                    dt = (3.0 * at(prev, k, i, j) - 4.0 * at(prev, k - 1, i, j) + at(prev, k - 2, i, j)) /
                         (G.times[k] - G.times[k - 1]) * 0.5;
                else
                    dt = (at(prev, k + 1, i, j) - at(prev, k - 1, i, j)) / (G.times[k + 1] - G.times[k - 1]);
                // second differences with linear extrapolation at the edges of the auxiliary box
                auto d2 = [&](int di, int dj) {
                    int i0 = std::clamp(i, 1, S - 2), j0 = std::clamp(j, 1, S - 2);
                    if (di) return at(prev, k, i0 + 1, j) - 2.0 * at(prev, k, i0, j) + at(prev, k, i0 - 1, j);
                    return at(prev, k, i, j0 + 1) - 2.0 * at(prev, k, i, j0) + at(prev, k, i, j0 - 1);
                };
                cplx lap = (d2(1, 0) + d2(0, 1)) / (h * h);
                La[k * P + static_cast<std::size_t>(i) * S + j] = I * dt + lap + q(t, G.point(i, j)) * at(prev, k, i, j);
            }
        // cumulative trapezoid in σ from the centre row; dσ-to-s factor 1/|ω|
        for (int j = 0; j < S; ++j) {
            const double c = 0.5 * h / speed;
            for (int dir : {1, -1}) {
                cplx acc = 0;
                for (int i = G.half + dir; i >= 0 && i < S; i += dir) {
                    const cplx a = La[k * P + static_cast<std::size_t>(i - dir) * S + j];
                    const cplx b = La[k * P + static_cast<std::size_t>(i) * S + j];
                    acc += dir * c * (a + b);
                    out[k * P + static_cast<std::size_t>(i) * S + j] = 0.5 * I * acc;
                }
            }
        }
    }
    return out;
}

class GOProbe {
public:
    const GOSpec& spec() const { return spec_; }
    bool analytic() const { return analytic_; }
    const TimePlateau& theta() const { return theta_; }
    double speed() const { return spec_.omega.head(n_).norm(); }

    double phase_Phi(double t, const Vec3& x) const {
        const double w2 = spec_.omega.head(n_).squaredNorm();
        return spec_.rho * (x.head(n_).dot(spec_.omega.head(n_)) - spec_.rho * w2 * t);
    }
    // s with x = x_L + s ω, x_L on the reference hyperplane
    double s_coord(const Vec3& x) const { return (x - y_).head(n_).dot(spec_.omega.head(n_)) / spec_.omega.head(n_).squaredNorm(); }

    cplx amplitude(int k, double t, const Vec3& x) const {
        if (k < 0 || k > spec_.N) return 0.0;
        if (!analytic_) return interp(aux_[k], t_index(t), x);
        RJet th = theta_.jet(t, k + 1);
        return modulation(t, x) * poly_sum(k, s_coord(x), th);
    }

    cplx value(double t, const Vec3& x) const {
        cplx s = 0, rk = 1;
        for (int k = 0; k <= spec_.N; ++k, rk /= spec_.rho) s += rk * amplitude(k, t, x);
        return std::exp(cplx(0, phase_Phi(t, x))) * s;
    }

    SpaceTimeField sample(const GridPtr& g) const {
        check_grid(*g);
        SpaceTimeField v(g, "go");
        for (int k = 0; k < g->time_levels(); ++k) {
            const double t = g->time(k);
            cplx* L = v.level(k);
            if (analytic_) {
                RJet th = theta_.jet(t, spec_.N + 1);
                for (int i = 0; i < g->num_nodes(); ++i) {
                    if (g->type(i) == Grid::NodeType::Inactive) continue;
                    L[i] = value_analytic(t, g->coord(i), th);
                }
            } else {
                for (int i = 0; i < g->num_nodes(); ++i)
                    if (g->type(i) != Grid::NodeType::Inactive) L[i] = value_aux(k, t, g->coord(i));
            }
        }
        return v;
    }

    BoundaryData trace(const GridPtr& g) const {
        check_grid(*g);
        BoundaryData f(g);
        const auto& bn = g->boundary();
        for (int k = 0; k < g->time_levels(); ++k) {
            const double t = g->time(k);
            RJet th = analytic_ ? theta_.jet(t, spec_.N + 1) : RJet(0, 0.0);
            for (int b = 0; b < f.slots(); ++b) {
                Vec3 x = g->coord(bn[b]);
                f.at(k, b) = analytic_ ? value_analytic(t, x, th) : value_aux(k, t, x);
            }
        }
        f.label = "go-trace";
        return f;
    }

private:
    friend GOProbe build_go(const GOSpec&, const Potential&, const GridPtr&);

    cplx modulation(double t, const Vec3& x) const {
        if (spec_.flavor == GOSpec::Flavor::Plain) return 1.0;
        return std::exp(cplx(0, spec_.tau * t + x.head(n_).dot(spec_.xi.head(n_))));
    }
    // Σ_j p_{k,j}(s) θ^{(j)}(t)
    cplx poly_sum(int k, double s, const RJet& th) const {
        cplx r = 0;
        const auto& pk = poly_[k];
        for (std::size_t j = 0; j < pk.size(); ++j) {
            cplx pv = 0;
            for (int m = static_cast<int>(pk[j].size()) - 1; m >= 0; --m) pv = pv * s + pk[j][m];
            r += pv * th.derivative(static_cast<int>(j));
        }
        return r;
    }
    cplx value_analytic(double t, const Vec3& x, const RJet& th) const {
        const double s = s_coord(x);
        cplx sum = 0, rk = 1;
        for (int k = 0; k <= spec_.N; ++k, rk /= spec_.rho) sum += rk * poly_sum(k, s, th);
        return std::exp(cplx(0, phase_Phi(t, x))) * modulation(t, x) * sum;
    }
    cplx value_aux(int k, double t, const Vec3& x) const {
        cplx s = 0, rk = 1;
        for (int m = 0; m <= spec_.N; ++m, rk /= spec_.rho) s += rk * interp(aux_[m], k, x);
        return std::exp(cplx(0, phase_Phi(t, x))) * s;
    }
    int t_index(double t) const {
        const auto& T = G_.times;
        auto it = std::lower_bound(T.begin(), T.end(), t - 1e-12);
        if (it == T.end() || std::abs(*it - t) > 1e-9) throw ProbeError("numeric GO amplitudes exist only at grid times");
        return static_cast<int>(it - T.begin());
    }
    cplx interp(const GOAuxField& f, int k, const Vec3& x) const {
        Vec3 d = x - G_.y;
        double a = d.dot(G_.u) / G_.h + G_.half, b = d.dot(G_.e) / G_.h + G_.half;
        const int S = G_.side();
        int i = std::clamp(static_cast<int>(std::floor(a)), 0, S - 2), j = std::clamp(static_cast<int>(std::floor(b)), 0, S - 2);
        double fa = a - i, fb = b - j;
        const std::size_t o = k * G_.plane();
        auto v = [&](int ii, int jj) { return f[o + static_cast<std::size_t>(ii) * S + jj]; };
        return (1 - fa) * ((1 - fb) * v(i, j) + fb * v(i, j + 1)) + fa * ((1 - fb) * v(i + 1, j) + fb * v(i + 1, j + 1));
    }
    void check_grid(const Grid& g) const {
        if (!analytic_ && (static_cast<int>(G_.times.size()) != g.time_levels() || std::abs(G_.times.back() - g.T()) > 1e-12))
            throw ProbeError("numeric GO probe sampled on a grid with different time levels");
    }

    GOSpec spec_;
    int n_ = 2;
    Vec3 y_;
    TimePlateau theta_;
    bool analytic_ = true;
    // poly_[k][j][m]: coefficient of s^m θ^{(j)} in a_k e^{-iψ}
    std::vector<std::vector<std::vector<cplx>>> poly_;
    GOAuxGrid G_;
    std::vector<GOAuxField> aux_;
};

inline GOProbe build_go(const GOSpec& spec, const Potential& q, const GridPtr& g) {
    const Domain& dom = g->domain();
    GOProbe P;
    P.spec_ = spec;
    P.n_ = dom.n;
    const int n = dom.n;
    const double w2 = spec.omega.head(n).squaredNorm();
    if (!(w2 > 0)) throw ProbeError("GO direction must be nonzero");
    if (!(spec.rho > 1)) throw ProbeError("GO frequency rho must exceed 1");
    if (spec.N < 0) throw ProbeError("GO order must be nonnegative");
    if (spec.flavor == GOSpec::Flavor::Modulated &&
        std::abs(spec.xi.head(n).dot(spec.omega.head(n))) > 1e-12 * (1 + spec.xi.head(n).norm()) * std::sqrt(w2))
        throw ProbeError("xi must be orthogonal to omega");
    P.theta_ = TimePlateau(spec.h, spec.T_star);
    P.y_ = spec.y ? *spec.y : dom.center();
    const bool mod = spec.flavor == GOSpec::Flavor::Modulated;
    const double tau = mod ? spec.tau : 0.0, xi2 = mod ? spec.xi.head(n).squaredNorm() : 0.0;
    if (q.constant) {
        const cplx q0 = *q.constant;
        P.poly_.resize(spec.N + 1);
        P.poly_[0] = {{1.0}};
        const cplx I(0, 1);
        for (int k = 1; k <= spec.N; ++k) {
            const auto& pr = P.poly_[k - 1];
            const int J = static_cast<int>(pr.size()) + 1;
            std::vector<std::vector<cplx>> cur(J);
            for (int j = 0; j < J; ++j) {
                // integrand polynomial: i p_{j-1} + (q0 - τ - |ξ|²) p_j + p_j''/|ω|²
                std::vector<cplx> f;
                auto addp = [&](const std::vector<cplx>& a, cplx c) {
                    if (f.size() < a.size()) f.resize(a.size(), 0.0);
                    for (std::size_t m = 0; m < a.size(); ++m) f[m] += c * a[m];
                };
                if (j >= 1 && j - 1 < static_cast<int>(pr.size())) addp(pr[j - 1], I);
                if (j < static_cast<int>(pr.size())) {
                    addp(pr[j], q0 - tau - xi2);
                    std::vector<cplx> dd;
                    for (std::size_t m = 2; m < pr[j].size(); ++m) dd.push_back(pr[j][m] * double(m * (m - 1)) / w2);
                    addp(dd, 1.0);
                }
                std::vector<cplx> integ(f.size() + 1, 0.0);
                for (std::size_t m = 0; m < f.size(); ++m) integ[m + 1] = 0.5 * I * f[m] / double(m + 1);
                cur[j] = integ;
            }
            P.poly_[k] = cur;
        }
        return P;
    }
    if (n != 2) throw ProbeError("non-constant potentials in GO probes are supported for n = 2 only");
    P.analytic_ = false;
    GOAuxGrid& G = P.G_;
    G.y = P.y_;
    G.u = Vec3::Zero();
    G.u.head(2) = spec.omega.head(2) / std::sqrt(w2);
    G.e = Vec3(-G.u[1], G.u[0], 0);
    G.h = 0.5 * g->dx_min();
    double R = 0;
    for (double a : {dom.lo()[0], dom.hi()[0]})
        for (double b : {dom.lo()[1], dom.hi()[1]}) R = std::max(R, (Vec3(a, b, 0) - G.y).norm());
    G.half = static_cast<int>(std::ceil(R / G.h)) + 2;
    for (int k = 0; k < g->time_levels(); ++k) G.times.push_back(g->time(k));
    const std::size_t Pn = G.plane();
    GOAuxField a0(Pn * G.times.size());
    for (std::size_t k = 0; k < G.times.size(); ++k) {
        const double t = G.times[k], th = P.theta_(t);
        for (int i = 0; i < G.side(); ++i)
            for (int j = 0; j < G.side(); ++j) a0[k * Pn + static_cast<std::size_t>(i) * G.side() + j] = th * P.modulation(t, G.point(i, j));
    }
    P.aux_.push_back(std::move(a0));
    // the modulation factor e^{iψ} is kept inside the amplitudes here
    for (int k = 1; k <= spec.N; ++k) P.aux_.push_back(go_transport_step(G, P.aux_.back(), q, std::sqrt(w2)));
    return P;
}

}  // namespace nlsdn
