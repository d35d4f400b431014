#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nlsdn/linearize.hpp"
#include "nlsdn/parallel.hpp"
#include "nlsdn/probes.hpp"

namespace nlsdn {

class ReconstructError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- wave vectors ----

struct WaveTriple {
    int n = 2;
    Vec3 omega0 = Vec3::Zero(), omega1 = Vec3::Zero(), omega2 = Vec3::Zero();

    double sum_residual() const { return (omega1 + omega2 - omega0).norm() / omega0.norm(); }
    double norm_residual() const {
        return std::abs(omega1.squaredNorm() + omega2.squaredNorm() - omega0.squaredNorm()) / omega0.squaredNorm();
    }
    void check(double tol = 1e-12) const {
        if (!(omega0.norm() > 0)) throw ReconstructError("degenerate wave triple");
        if (!(sum_residual() <= tol) || !(norm_residual() <= tol))
            throw ReconstructError("wave triple violates w1+w2=w0 or |w1|^2+|w2|^2=|w0|^2");
    }
};

// ω1 = ω0/2 + w, ω2 = ω0/2 - w with w ⊥ ω0, |w| = |ω0|/2, |ω1| = |ω2| = scale.
// With ξ given, ω0 ⊥ ξ; pairs of grid axes e_a ± e_b are tried first.
inline WaveTriple select_wave_triple(int n, const std::optional<Vec3>& xi, double scale = 1.0) {
    if (n < 2 || n > 3) throw ReconstructError("wave triples need n = 2 or 3");
    if (!(scale > 0)) throw ReconstructError("wave scale must be positive");
    WaveTriple t;
    t.n = n;
    auto axis = [](int a) {
        Vec3 e = Vec3::Zero();
        e[a] = 1;
        return e;
    };
    if (!xi) {
        t.omega1 = scale * axis(0);
        t.omega2 = scale * axis(1);
        t.omega0 = t.omega1 + t.omega2;
        return t;
    }
    Vec3 x = Vec3::Zero();
    x.head(n) = xi->head(n);
    const double xn = x.norm();
    if (!(xn > 0)) throw ReconstructError("xi must be nonzero when given");
    const double tol = 1e-14 * xn;
    // prefer pairs where ξ vanishes on both axes, then e_a + e_b, then e_a - e_b
    for (int pass = 0; pass < 3; ++pass)
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                double sg = pass == 2 ? -1.0 : 1.0;
                bool ok = pass == 0 ? (std::abs(x[a]) <= tol && std::abs(x[b]) <= tol) : std::abs(x[a] + sg * x[b]) <= tol;
                if (!ok) continue;
                t.omega1 = scale * axis(a);
                t.omega2 = sg * scale * axis(b);
                t.omega0 = t.omega1 + t.omega2;
                return t;
            }
    // fallback: any ω0 ⊥ ξ, with w along ξ
    Vec3 xh = x / xn, u;
    if (n == 2) {
        u = Vec3(-xh[1], xh[0], 0);
    } else {
        int k = 0;
        for (int d = 1; d < 3; ++d)
            if (std::abs(xh[d]) < std::abs(xh[k])) k = d;
        u = xh.cross(axis(k)).normalized();
    }
    const double c = scale / std::sqrt(2.0);
    t.omega1 = c * (u + xh);
    t.omega2 = c * (u - xh);
    t.omega0 = 2 * c * u;
    return t;
}

enum class NonlinearityKind { Power, GrossPitaevskii };

struct WaveTuple {
    NonlinearityKind kind = NonlinearityKind::Power;
    int m = 2;
    std::vector<Vec3> omegas;  // ω0 first, then ω1, ω2, ...
    double sum_residual = 0, norm_residual = 0;
};

// Power kind β u^m: ω0 = ω1+...+ωm and |ω0|² = Σ|ωj|². GP kind β|u|^{2m}u: alternating sums
// ω1-ω2+ω3-...+ω_{2m+1}-ω0 = 0 (and squared norms), with ω3..ω_{2m} copies of ω1 cancelling in pairs.
inline WaveTuple select_wave_tuple_higher(int m, NonlinearityKind kind, int n, double r = 0.5) {
    if (m < 1) throw ReconstructError("nonlinearity order must be at least 1");
    WaveTuple w;
    w.kind = kind;
    w.m = m;
    if (kind == NonlinearityKind::Power) {
        if (m < 2 || m > n) throw ReconstructError("power kind needs 2 <= m <= n");
        Vec3 s = Vec3::Zero();
        w.omegas.assign(m + 1, Vec3::Zero());
        for (int j = 1; j <= m; ++j) {
            w.omegas[j][j - 1] = 1;
            s += w.omegas[j];
        }
        w.omegas[0] = s;
        double sq = 0;
        for (int j = 1; j <= m; ++j) sq += w.omegas[j].squaredNorm();
        w.sum_residual = (s - w.omegas[0]).norm();
        w.norm_residual = std::abs(sq - w.omegas[0].squaredNorm());
    } else {
        if (n < 3) throw ReconstructError("Gross-Pitaevskii family needs n >= 3");
        if (!(r > 0 && r < 1)) throw ReconstructError("family parameter r must lie in (0,1)");
        const double s = std::sqrt(1 - r * r);
        const int last = n - 1;
        Vec3 w0 = Vec3::Zero(), w1 = Vec3::Zero(), w2 = Vec3::Zero(), wl = Vec3::Zero();
        w0[0] = 1, w0[1] = -1;
        w1[0] = s, w1[1] = -1, w1[last] = r;
        w2[0] = s, w2[1] = s, w2[last] = r;
        wl[0] = 1, wl[1] = s;
        w.omegas.assign(2 * m + 2, w1);
        w.omegas[0] = w0;
        w.omegas[2] = w2;
        w.omegas[2 * m + 1] = wl;
        Vec3 a = -w.omegas[0];
        double b = -w.omegas[0].squaredNorm();
        for (int j = 1; j <= 2 * m + 1; ++j) {
            double sg = j % 2 == 1 ? 1.0 : -1.0;
            a += sg * w.omegas[j];
            b += sg * w.omegas[j].squaredNorm();
        }
        double ra = (w0 + w2 - w1 - wl).norm();
        double rb = std::abs(w0.squaredNorm() + w2.squaredNorm() - w1.squaredNorm() - wl.squaredNorm());
        w.sum_residual = std::max(a.norm(), ra);
        w.norm_residual = std::max(std::abs(b), rb);
    }
    if (!(w.sum_residual < 1e-12) || !(w.norm_residual < 1e-12))
        throw ReconstructError("wave tuple constraints not met");
    return w;
}

// ---- regularisation schedule ----

struct ScheduleConstants {
    int n = 2;
    int N = 2;
    int kappa = 1;
    double lambda = 4e12;
    double Lambda = 1e72;
    double m3 = 1.0;
    double mu1 = 0.5;
    double mu_prime = 0.5;
    double gamma_star = 1.0;
    double T_star = 1.0;
    // prefactors applied to ρ, M, h before use; the raw schedule values stay untouched
    double rho_scale = 1.0, M_scale = 1.0, h_scale = 1.0;
};

struct Schedule {
    double delta = 0;
    double eps = 0, gamma = 0, rho = 0, h = 0, M = 0;
    double mu = 0, alpha1 = 0, alpha2 = 0, alpha3 = 0;
    ScheduleConstants c;

    double rho_used() const { return c.rho_scale * rho; }
    double M_used() const { return c.M_scale * M; }
    double h_used() const { return c.h_scale * h; }
};

class ScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline Schedule raw_schedule(double delta, const ScheduleConstants& c) {
    if (!(c.m3 > 0) || !(c.mu1 > 0 && c.mu1 < 1) || !(c.gamma_star > 0) || !(c.Lambda > 0) || !(c.lambda > 0))
        throw ScheduleError("invalid schedule constants");
    const double upper = std::min({1.0, std::exp(-6 * c.m3 * c.gamma_star), std::sqrt(c.Lambda)});
    if (!(delta > 0) || !(delta < upper))
        throw ScheduleError("delta outside the valid range (0, " + std::to_string(upper) + ")");
    Schedule s;
    s.c = c;
    s.delta = delta;
    s.mu = c.mu1 / (8 * c.kappa + 5);
    s.alpha1 = 4 * c.N + 6 * c.kappa + 12;
    s.alpha2 = 2 * c.N + 2 * c.kappa + 2;
    s.alpha3 = s.alpha2 + 0.5 * (s.alpha1 + c.n + 2);
    s.eps = c.lambda / 4 * std::pow(c.Lambda, -1.0 / 6) * std::cbrt(delta);
    s.gamma = std::abs(std::log(delta)) / (6 * c.m3);
    s.rho = std::pow(s.gamma, s.mu);
    s.M = std::pow(s.gamma, s.mu / (0.5 + s.alpha3));
    s.h = 1 / std::sqrt(s.M);
    return s;
}
}  // namespace detail

inline Schedule make_schedule(double delta, const ScheduleConstants& c) {
    Schedule s = detail::raw_schedule(delta, c);
    if (!(s.h_used() < c.T_star / 4)) throw ScheduleError("time cutoff h must be below T*/4");
    return s;
}

// Sets the prefactors so that at delta_ref the operative ρ, h, M equal the given targets.
inline void calibrate_scales(ScheduleConstants& c, double delta_ref, double rho, double h, double M) {
    Schedule s = detail::raw_schedule(delta_ref, c);
    c.rho_scale = rho / s.rho;
    c.h_scale = h / s.h;
    c.M_scale = M / s.M;
}

// Largest relative violation among the five defining relations.
inline double schedule_invariant_residual(const Schedule& s) {
    const auto& c = s.c;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    double r = rel(s.eps, c.lambda / 4 * std::pow(c.Lambda, -1.0 / 6) * std::cbrt(s.delta));
    r = std::max(r, rel(6 * c.m3 * s.gamma, std::abs(std::log(s.delta))));
    r = std::max(r, rel(s.rho, std::pow(s.gamma, c.mu1 / (8 * c.kappa + 5))));
    r = std::max(r, rel(s.M, std::pow(s.gamma, s.mu / (0.5 + s.alpha3))));
    r = std::max(r, rel(s.h, std::pow(s.M, -0.5)));
    return r;
}

// ε f1 + ε f2 in the admissible set S_λ
inline Admissibility schedule_admissibility(const Schedule& s, const BoundaryData& f1, const BoundaryData& f2) {
    return admissibility_check(cplx(s.eps) * (f1 + f2), s.c.lambda, s.c.kappa);
}

// ---- global recovery through Fourier samples ----

struct FourierSample {
    double tau = 0;
    Vec3 xi = Vec3::Zero();
    cplx value = 0;
    double rho = 0, h = 0;
    double correction_bound = 0;  // ρ^{-1}<τ,ξ>^{2N+2κ+2} h^{-3N-6κ-3}
    WaveTriple triple;
};

struct FourierSamplerOptions {
    double scale = 1.0;  // |ω1| = |ω2|
    std::optional<Vec3> y;
    bool check_admissibility = true;
    int threads = 1;
};

inline double japanese_bracket(double tau, const Vec3& xi) { return std::sqrt(1 + tau * tau + xi.squaredNorm()); }

// Samples of the transform of βθ_h³ from DN data, one D² per distinct ω0 direction.
class FourierSampler {
public:
    FourierSampler(DNEvaluator data, Potential q, GridPtr grid, Schedule sched, FourierSamplerOptions opt = {})
        : data_(std::move(data)), q_(std::move(q)), g_(std::move(grid)), s_(std::move(sched)), opt_(opt) {
        if (!(s_.h_used() < s_.c.T_star / 4)) throw ReconstructError("schedule violation: h >= T*/4");
        if (s_.c.T_star > g_->T() + 1e-12) throw ReconstructError("T* exceeds the simulated horizon");
    }

    const Schedule& schedule() const { return s_; }

    WaveTriple triple_for(const Vec3& xi) const {
        const bool zero = xi.head(g_->n()).norm() == 0;
        return select_wave_triple(g_->n(), zero ? std::nullopt : std::optional<Vec3>(xi), opt_.scale);
    }

    // computes the D² traces needed for the given points, in parallel over triples
    void prepare(const std::vector<std::pair<double, Vec3>>& pts) {
        std::vector<WaveTriple> todo;
        for (const auto& [tau, xi] : pts) {
            WaveTriple t = triple_for(xi);
            if (!cache_.count(key(t)) && std::none_of(todo.begin(), todo.end(), [&](const WaveTriple& o) { return key(o) == key(t); }))
                todo.push_back(t);
        }
        auto res = parallel_map<NeumannTrace>(static_cast<int>(todo.size()), opt_.threads,
                                              [&](int i) { return second_difference(todo[i]); });
        for (std::size_t i = 0; i < todo.size(); ++i) cache_[key(todo[i])] = std::move(res[i]);
    }

    FourierSample sample(double tau, const Vec3& xi_in) {
        if (!cache_.count(key(triple_for(xi_in)))) prepare({{tau, xi_in}});
        return sample_prepared(tau, xi_in);
    }

    // all samples, D² traces first; ordered as pts
    std::vector<FourierSample> sample_all(const std::vector<std::pair<double, Vec3>>& pts) {
        prepare(pts);
        return parallel_map<FourierSample>(static_cast<int>(pts.size()), opt_.threads,
                                           [&](int i) { return sample_prepared(pts[i].first, pts[i].second); });
    }

    FourierSample sample_prepared(double tau, const Vec3& xi_in) const {
        Vec3 xi = Vec3::Zero();
        xi.head(g_->n()) = xi_in.head(g_->n());
        FourierSample out;
        out.tau = tau;
        out.xi = xi;
        out.triple = triple_for(xi);
        out.rho = s_.rho_used();
        out.h = s_.h_used();
        const double bracket = japanese_bracket(tau, xi);
        const int N = s_.c.N, k = s_.c.kappa;
        out.correction_bound = std::pow(bracket, 2 * N + 2 * k + 2) * std::pow(out.h, -(3 * N + 6 * k + 3)) / out.rho;
        auto it = cache_.find(key(out.triple));
        if (it == cache_.end()) throw ReconstructError("second difference for this triple was not prepared");
        BoundaryData f0 = probe(out.triple.omega0, GOSpec::Flavor::Modulated, tau, xi).trace(g_);
        out.value = -0.5 * measured_pairing(it->second, f0);
        return out;
    }

    GOProbe probe(const Vec3& omega, GOSpec::Flavor fl, double tau = 0, const Vec3& xi = Vec3::Zero()) const {
        GOSpec sp;
        sp.omega = omega;
        sp.rho = s_.rho_used();
        sp.flavor = fl;
        sp.tau = tau;
        sp.xi = xi;
        sp.h = s_.h_used();
        sp.N = s_.c.N;
        sp.T_star = s_.c.T_star;
        sp.y = opt_.y;
        return build_go(sp, q_, g_);
    }

private:
    static std::string key(const WaveTriple& t) {
        char b[128];
        std::snprintf(b, sizeof b, "%.12f,%.12f,%.12f|%.12f,%.12f,%.12f", t.omega1[0], t.omega1[1], t.omega1[2], t.omega2[0],
                      t.omega2[1], t.omega2[2]);
        return b;
    }

    NeumannTrace second_difference(const WaveTriple& t) const {
        BoundaryData f1 = probe(t.omega1, GOSpec::Flavor::Plain).trace(g_);
        BoundaryData f2 = probe(t.omega2, GOSpec::Flavor::Plain).trace(g_);
        SecondDifferenceOptions o;
        if (opt_.check_admissibility) {
            o.lambda = s_.c.lambda;
            o.kappa = s_.c.kappa;
        }
        try {
            return second_difference_dn(data_, f1, f2, s_.eps, s_.eps, o).d2;
        } catch (const IdentityError& e) {
            throw ReconstructError(std::string("inadmissible probe data: ") + e.what());
        }
    }

    DNEvaluator data_;
    Potential q_;
    GridPtr g_;
    Schedule s_;
    FourierSamplerOptions opt_;
    std::map<std::string, NeumannTrace> cache_;
};

inline FourierSample fourier_sample(const DNEvaluator& data, const Potential& q, const GridPtr& g, double tau, const Vec3& xi,
                                    const Schedule& sched, const FourierSamplerOptions& opt = {}) {
    FourierSampler s(data, q, g, sched, opt);
    return s.sample(tau, xi);
}

// Lattice Δτ = 2π/T_per, Δξ_d = 2π/L_d; the reconstruction is the Fourier series on the period box.
struct FourierLattice {
    int n = 2;
    double T_per = 1.0;
    Vec3 L_per = Vec3(1, 1, 1);

    // all lattice points with |(τ,ξ)| <= M
    std::vector<std::pair<double, Vec3>> points(double M) const {
        std::vector<std::pair<double, Vec3>> pts;
        const double dt = 2 * kPi / T_per;
        int jt = static_cast<int>(std::floor(M / dt));
        int jx[3] = {0, 0, 0};
        for (int d = 0; d < n; ++d) jx[d] = static_cast<int>(std::floor(M / (2 * kPi / L_per[d])));
        for (int a = -jt; a <= jt; ++a)
            for (int b = -jx[0]; b <= jx[0]; ++b)
                for (int c = -jx[1]; c <= jx[1]; ++c)
                    for (int e = -jx[2]; e <= jx[2]; ++e) {
                        Vec3 xi(2 * kPi * b / L_per[0], 2 * kPi * c / L_per[1], n == 3 ? 2 * kPi * e / L_per[2] : 0.0);
                        double tau = a * dt;
                        if (tau * tau + xi.squaredNorm() <= M * M * (1 + 1e-12)) pts.emplace_back(tau, xi);
                    }
        return pts;
    }
};

struct FourierInversion {
    std::vector<FourierSample> used;  // samples inside the ball, lattice order
    FourierLattice lattice;
    TimePlateau theta;
    double M = 0;

    // estimate of βθ_h³
    cplx raw(double t, const Vec3& x) const {
        cplx s = 0;
        for (const auto& u : used)
            if (u.value != cplx(0)) s += u.value * std::exp(cplx(0, u.tau * t + x.head(lattice.n).dot(u.xi.head(lattice.n))));
        double vol = lattice.T_per;
        for (int d = 0; d < lattice.n; ++d) vol *= lattice.L_per[d];
        return s / vol;
    }
    bool masked(double t) const { return std::pow(theta(t), 3) < 0.5; }
    cplx beta(double t, const Vec3& x) const {
        if (masked(t)) return 0.0;
        return raw(t, x) / std::pow(theta(t), 3);
    }
    Potential as_potential() const {
        auto self = std::make_shared<FourierInversion>(*this);
        Potential p = Potential::from_function([self](double t, const Vec3& x) { return self->beta(t, x); }, false, false);
        p.label = "reconstructed-beta";
        return p;
    }
};

inline FourierInversion invert_fourier(const std::vector<FourierSample>& samples, const Schedule& sched, const FourierLattice& lat,
                                       std::optional<double> M_override = std::nullopt) {
    const double M = M_override ? *M_override : sched.M_used();
    FourierInversion inv;
    inv.lattice = lat;
    inv.M = M;
    inv.theta = TimePlateau(sched.h_used(), sched.c.T_star);
    const double dt = 2 * kPi / lat.T_per;
    // lattice index of a frequency, or nullopt when it is off the lattice
    auto index = [&](double tau, const Vec3& xi) -> std::optional<std::array<long, 4>> {
        std::array<long, 4> id{std::lround(tau / dt), 0, 0, 0};
        double d = std::abs(tau / dt - id[0]);
        for (int k = 0; k < lat.n; ++k) {
            double v = xi[k] * lat.L_per[k] / (2 * kPi);
            id[k + 1] = std::lround(v);
            d = std::max(d, std::abs(v - id[k + 1]));
        }
        if (d >= 1e-6) return std::nullopt;
        return id;
    };
    std::map<std::array<long, 4>, const FourierSample*> by_index;
    for (const auto& s : samples)
        if (auto id = index(s.tau, s.xi)) by_index.emplace(*id, &s);
    for (const auto& [tau, xi] : lat.points(M)) {
        auto it = by_index.find(*index(tau, xi));
        const FourierSample* hit = it == by_index.end() ? nullptr : it->second;
        if (!hit) {
            char b[160];
            std::snprintf(b, sizeof b, "undersampled frequency grid: missing (tau=%g, xi=(%g,%g,%g))", tau, xi[0], xi[1], xi[2]);
            throw ReconstructError(b);
        }
        inv.used.push_back(*hit);
    }
    return inv;
}

// ---- local recovery with Gaussian beams ----

struct LocalRecoveryOptions {
    double rho = 30;
    double eta = 0.2;
    TimePlateau iota{0.05, 1.0};
    int n_phase = 4, n_amp = 1;
    double eps = 1e-2;
    int visibility_samples = 64;
    int tube_offsets = 9;
    double cal_radius = 0.3;  // calibration β = 1 within this distance of p, 0 beyond 1.5x
    NonlinearOptions solver;
    bool swap = false;  // exchange the roles of ω1 and ω2
    int threads = 1;
};

struct LocalEstimate {
    cplx estimate = 0;
    cplx J = 0, J_cal = 0;
    WaveTriple triple;
};

// chord of the infinite line x0 + s u with the domain; empty if it misses
inline std::optional<std::pair<Vec3, Vec3>> line_chord(const Domain& dom, const Vec3& x0, const Vec3& u) {
    double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
    if (dom.kind == Domain::Kind::Ball) {
        double b = x0.head(dom.n).dot(u.head(dom.n)), c = x0.head(dom.n).squaredNorm() - dom.radius * dom.radius;
        double disc = b * b - c;
        if (disc <= 0) return std::nullopt;
        lo = -b - std::sqrt(disc);
        hi = -b + std::sqrt(disc);
    } else {
        for (int d = 0; d < dom.n; ++d) {
            if (std::abs(u[d]) < 1e-15) {
                if (x0[d] <= 0 || x0[d] >= dom.lengths[d]) return std::nullopt;
                continue;
            }
            double a = -x0[d] / u[d], b = (dom.lengths[d] - x0[d]) / u[d];
            lo = std::max(lo, std::min(a, b));
            hi = std::min(hi, std::max(a, b));
        }
    }
    if (!(hi - lo > dom.tol())) return std::nullopt;
    return std::make_pair(Vec3(x0 + lo * u), Vec3(x0 + hi * u));
}

// every line of the η-tube around x = p + sω meets the boundary inside Γ
inline bool tube_exits_through(const Domain& dom, const BoundaryPatch& gamma, const Vec3& p, const Vec3& omega, double eta,
                               int offsets) {
    Vec3 u = Vec3::Zero();
    u.head(dom.n) = omega.head(dom.n).normalized();
    std::vector<Vec3> perp;
    if (dom.n == 2) {
        Vec3 e(-u[1], u[0], 0);
        for (int k = 0; k < offsets; ++k) perp.push_back((-1 + 2.0 * k / std::max(1, offsets - 1)) * eta * e);
    } else {
        Vec3 a = std::abs(u[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
        Vec3 e1 = (a - a.dot(u) * u).normalized(), e2 = u.cross(e1);
        perp.push_back(Vec3::Zero());
        for (double r : {0.5 * eta, eta})
            for (int k = 0; k < 2 * offsets; ++k) {
                double th = kPi * k / offsets;
                perp.push_back(r * (std::cos(th) * e1 + std::sin(th) * e2));
            }
    }
    for (const Vec3& z : perp) {
        auto ch = line_chord(dom, p + z, u);
        if (!ch) continue;
        if (!gamma.contains(dom, ch->first) || !gamma.contains(dom, ch->second)) return false;
    }
    return true;
}

inline Potential calibration_beta(const Vec3& p, double radius, int n) {
    Potential b = Potential::from_function(
        [p, radius, n](double, const Vec3& x) -> cplx {
            double r = (x - p).head(n).norm();
            return smooth_step((1.5 * radius - r) / (0.5 * radius));
        },
        true, true, 1.0);
    b.label = "calibration-beta";
    return b;
}

namespace detail {

struct BeamSet {
    WaveTriple triple;
    BoundaryData f1, f2, f0;
};

inline BeamSet local_beams(const Potential& q, const GridPtr& g, const Vec3& p, const BoundaryPatch& gamma,
                           const LocalRecoveryOptions& opt) {
    const Domain& dom = g->domain();
    Visibility vis = in_visibility_set(dom, gamma, p, opt.visibility_samples);
    if (!vis.member) throw ReconstructError("point outside the visibility set of the boundary patch");
    std::optional<WaveTriple> pick;
    auto try_pair = [&](const Vec3& w1, const Vec3& w2) {
        if (pick) return;
        for (const Vec3& w : {w1, w2, Vec3(w1 + w2)})
            if (!tube_exits_through(dom, gamma, p, w, opt.eta, opt.tube_offsets)) return;
        WaveTriple t;
        t.n = dom.n;
        t.omega1 = w1;
        t.omega2 = w2;
        t.omega0 = w1 + w2;
        pick = t;
    };
    try_pair(vis.omega1, vis.omega2);
    if (dom.n == 2)
        for (int k = 0; k < opt.visibility_samples && !pick; ++k) {
            double th = 2 * kPi * k / opt.visibility_samples;
            try_pair(Vec3(std::cos(th), std::sin(th), 0), Vec3(-std::sin(th), std::cos(th), 0));
        }
    if (!pick) throw ReconstructError("beam tube exits through the complement of the boundary patch");
    WaveTriple t = *pick;
    if (opt.swap) std::swap(t.omega1, t.omega2);
    t.check();
    auto make = [&](const Vec3& w) {
        BeamSpec s;
        s.p = p;
        s.omega = w;
        s.eta = opt.eta;
        s.rho = opt.rho;
        s.iota = opt.iota;
        s.n_phase = dom.n == 3 ? 2 : opt.n_phase;
        s.n_amp = dom.n == 3 ? 0 : opt.n_amp;
        return build_beam(s, q, dom).trace(g);
    };
    BeamSet b{t, make(t.omega1), make(t.omega2), make(t.omega0)};
    for (const BoundaryData* f : {&b.f1, &b.f2, &b.f0})
        if (f->max_outside(gamma) > 1e-12 * std::max(1.0, f->max_abs()))
            throw ReconstructError("beam tube exits through the complement of the boundary patch");
    return b;
}

}  // namespace detail

// Beams U1, U2 along ω1, ω2 and U0 along ω0 = ω1+ω2 through p; J from the data, divided by the same
// functional computed for a synthetic model with β = 1 near p.
inline LocalEstimate recover_beta_point(const DNEvaluator& data, const Potential& q, const GridPtr& g, const Vec3& p,
                                        const BoundaryPatch& gamma, const LocalRecoveryOptions& opt = {}) {
    if (opt.iota.horizon() > g->T() + 1e-12) throw ReconstructError("time cutoff extends past the simulated horizon");
    detail::BeamSet b = detail::local_beams(q, g, p, gamma, opt);
    Model cal{g, q, calibration_beta(p, opt.cal_radius, g->n()), gamma, opt.solver};
    DNEvaluator cal_dn = [&cal](const BoundaryData& f) { return cal.dn(f); };
    SecondDifferenceOptions so;
    so.concurrent = opt.threads > 1;
    auto d2 = parallel_map<NeumannTrace>(2, opt.threads, [&](int i) {
        return second_difference_dn(i == 0 ? data : cal_dn, b.f1, b.f2, opt.eps, opt.eps, so).d2;
    });
    LocalEstimate e;
    e.triple = b.triple;
    e.J = measured_pairing(d2[0], b.f0);
    e.J_cal = measured_pairing(d2[1], b.f0);
    if (e.J_cal == cplx(0)) throw ReconstructError("calibration functional vanished");
    e.estimate = e.J / e.J_cal;
    return e;
}

}  // namespace nlsdn
